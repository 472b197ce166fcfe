#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "voxstate/synth.hpp"

using namespace voxstate;

namespace {

bool mat_equal(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

SynthSpec small_spec() {
  SynthSpec sp;
  sp.n_subjects = 3;
  sp.runs_per_subject = 2;
  sp.timepoints_per_run = 40;
  sp.n_voxels_latent = 24;
  sp.dims = {6, 5, 4};
  sp.class_signal_amplitude = 1.0;
  sp.noise_sigma = 0.05;
  sp.seed = 11;
  return sp;
}

}  // namespace

TEST_CASE("block design cycles rest, neutral, rest, negative in 10-volume blocks") {
  std::vector<int> labels = block_design_labels(80);
  REQUIRE(labels.size() == 80);
  const int cycle[4] = {kRest, kNeutral, kRest, kNegative};
  for (std::size_t t = 0; t < labels.size(); ++t)
    CHECK(labels[t] == cycle[(t / 10) % 4]);

  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  CHECK(counts[kRest] == 40);
  CHECK(counts[kNeutral] == 20);
  CHECK(counts[kNegative] == 20);
}

TEST_CASE("block design handles partial final blocks") {
  std::vector<int> labels = block_design_labels(25);
  REQUIRE(labels.size() == 25);
  CHECK(labels[24] == kRest);
  CHECK(labels[19] == kNeutral);
}

TEST_CASE("generation is deterministic for a fixed spec") {
  SynthSpec sp = small_spec();
  SynthResult a = synth_generate(sp);
  SynthResult b = synth_generate(sp);
  REQUIRE(a.runs.size() == b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].subject_id == b.runs[i].subject_id);
    CHECK(a.runs[i].run_id == b.runs[i].run_id);
    CHECK(a.runs[i].labels == b.runs[i].labels);
    CHECK(a.runs[i].volumes == b.runs[i].volumes);
  }
  CHECK(mat_equal(a.truth.class_means, b.truth.class_means));

  sp.seed = 12;
  SynthResult c = synth_generate(sp);
  CHECK(a.runs[0].volumes != c.runs[0].volumes);
}

TEST_CASE("uniform run counts when mixed_runs is off") {
  SynthSpec sp = small_spec();
  SynthResult r = synth_generate(sp);
  CHECK(r.runs.size() == sp.n_subjects * sp.runs_per_subject);
  std::map<std::string, int> per_subject;
  for (const auto& run : r.runs) ++per_subject[run.subject_id];
  CHECK(per_subject.size() == sp.n_subjects);
  for (const auto& [id, n] : per_subject)
    CHECK(n == static_cast<int>(sp.runs_per_subject));
}

TEST_CASE("mixed_runs gives subject j (j mod runs) + 1 runs") {
  SynthSpec sp = small_spec();
  sp.n_subjects = 5;
  sp.runs_per_subject = 3;
  sp.mixed_runs = true;
  SynthResult r = synth_generate(sp);
  std::map<std::string, int> per_subject;
  for (const auto& run : r.runs) ++per_subject[run.subject_id];
  REQUIRE(per_subject.size() == 5);
  REQUIRE(r.truth.subject_ids.size() == 5);
  std::size_t total = 0;
  for (std::size_t j = 0; j < 5; ++j) {
    const int want = static_cast<int>(j % 3) + 1;
    CHECK(per_subject[r.truth.subject_ids[j]] == want);
    total += static_cast<std::size_t>(want);
  }
  CHECK(r.runs.size() == total);
}

TEST_CASE("shared mixing reuses one matrix, per-subject mixing differs") {
  SynthSpec sp = small_spec();
  sp.shared_mixing = true;
  SynthResult shared = synth_generate(sp);
  REQUIRE(shared.truth.mixing.size() == sp.n_subjects);
  for (std::size_t j = 1; j < sp.n_subjects; ++j)
    CHECK(mat_equal(shared.truth.mixing[j], shared.truth.mixing[0]));

  sp.shared_mixing = false;
  SynthResult own = synth_generate(sp);
  CHECK(!mat_equal(own.truth.mixing[1], own.truth.mixing[0]));
}

TEST_CASE("informative columns fit inside the mask") {
  SynthSpec sp = small_spec();
  SynthResult r = synth_generate(sp);
  const std::size_t kept = r.truth.mask.n_kept();
  REQUIRE(r.truth.informative_columns.size() == sp.n_voxels_latent);
  for (std::size_t i = 0; i < r.truth.informative_columns.size(); ++i) {
    CHECK(r.truth.informative_columns[i] < kept);
    if (i > 0)
      CHECK(r.truth.informative_columns[i] >
            r.truth.informative_columns[i - 1]);
  }
  // Out-of-mask voxels carry no signal and no noise.
  std::vector<std::uint8_t> keep = r.truth.mask.keep;
  for (const auto& run : r.runs)
    for (const auto& vol : run.volumes)
      for (std::size_t i = 0; i < keep.size(); ++i)
        if (!keep[i]) CHECK(vol.voxels[i] == 0.0);
}

TEST_CASE("true-model classifier is near-perfect without noise") {
  SynthSpec sp = small_spec();
  sp.noise_sigma = 0.0;
  SynthResult r = synth_generate(sp);
  CHECK(bayes_accuracy(r.runs, r.truth) >= 0.999);
}

TEST_CASE("class filter restricts scored samples") {
  SynthSpec sp = small_spec();
  sp.noise_sigma = 0.0;
  SynthResult r = synth_generate(sp);
  double two_class = bayes_accuracy(r.runs, r.truth, {kNeutral, kNegative});
  CHECK(two_class >= 0.999);
}

TEST_CASE("heavy noise drags the true-model classifier toward chance") {
  SynthSpec sp = small_spec();
  sp.noise_sigma = 40.0;
  SynthResult r = synth_generate(sp);
  CHECK(bayes_accuracy(r.runs, r.truth) < 0.7);
}

TEST_CASE("ground truth round-trips through JSON") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "synth_truth.json").string();
  SynthSpec sp = small_spec();
  SynthResult r = synth_generate(sp);
  write_ground_truth(path, r.truth);
  GroundTruth back = read_ground_truth(path);
  CHECK(back.mask.dims == r.truth.mask.dims);
  CHECK(back.mask.keep == r.truth.mask.keep);
  CHECK(mat_equal(back.class_means, r.truth.class_means));
  CHECK(back.subject_ids == r.truth.subject_ids);
  REQUIRE(back.mixing.size() == r.truth.mixing.size());
  for (std::size_t j = 0; j < back.mixing.size(); ++j)
    CHECK(mat_equal(back.mixing[j], r.truth.mixing[j]));
  CHECK(back.informative_columns == r.truth.informative_columns);
  CHECK(back.class_signal_amplitude == r.truth.class_signal_amplitude);
  CHECK(back.noise_sigma == r.truth.noise_sigma);
  std::remove(path.c_str());
}

TEST_CASE("spec validation rejects impossible geometry") {
  SynthSpec sp = small_spec();
  sp.n_voxels_latent = sp.dims.count() + 1;
  CHECK_THROWS_AS(synth_generate(sp), config_error);

  SynthSpec zero = small_spec();
  zero.n_subjects = 0;
  CHECK_THROWS_AS(synth_generate(zero), config_error);
}
