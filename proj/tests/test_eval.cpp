#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "voxstate/errors.hpp"
#include "voxstate/eval.hpp"
#include "voxstate/layers.hpp"
#include "voxstate/network.hpp"
#include "voxstate/synth.hpp"

using namespace voxstate;
using nn::Tensor;

namespace {

// Two Gaussian-ish blobs a trained net must separate easily.
void make_blobs(std::size_t n_per_class, std::size_t dim, Tensor& x,
                std::vector<std::size_t>& y, std::uint64_t seed) {
  Rng rng(seed);
  x = Tensor({2 * n_per_class, dim});
  y.assign(2 * n_per_class, 0);
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const std::size_t cls = i % 2;
    y[i] = cls;
    const double center = cls == 0 ? -2.0 : 2.0;
    for (std::size_t d = 0; d < dim; ++d)
      x.data[i * dim + d] = center + 0.5 * rng.normal();
  }
}

void init_net(nn::Network& net, std::uint64_t seed) {
  Rng base(seed);
  std::size_t stream = 0;
  for (std::size_t i = 0; i < net.n_layers(); ++i)
    net.layer(i).init_params(base, stream);
}

nn::Network make_mlp(std::size_t dim, std::size_t hidden, std::size_t classes,
                     std::uint64_t seed) {
  nn::Network net;
  net.add(std::make_unique<nn::Dense>("fc1", dim, hidden));
  net.add(std::make_unique<nn::ReLU>("act1"));
  net.add(std::make_unique<nn::Dense>("fc2", hidden, classes));
  init_net(net, seed);
  return net;
}

Dataset make_synth_dataset(const SynthSpec& spec) {
  SynthResult gen = synth_generate(spec);
  Dataset data;
  data.runs = std::move(gen.runs);
  data.mask = gen.truth.mask;
  return data;
}

bool same_matrix(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("loocv folds follow first appearance and partition the samples") {
  const std::vector<std::string> subj{"s2", "s1", "s2", "s3", "s1"};
  const auto folds = loocv_folds(subj);
  REQUIRE(folds.size() == 3);

  CHECK(folds[0].held_out_subject == "s2");
  CHECK(folds[1].held_out_subject == "s1");
  CHECK(folds[2].held_out_subject == "s3");

  CHECK(folds[0].test == std::vector<std::size_t>{0, 2});
  CHECK(folds[0].train == std::vector<std::size_t>{1, 3, 4});
  CHECK(folds[1].test == std::vector<std::size_t>{1, 4});
  CHECK(folds[1].train == std::vector<std::size_t>{0, 2, 3});
  CHECK(folds[2].test == std::vector<std::size_t>{3});
  CHECK(folds[2].train == std::vector<std::size_t>{0, 1, 2, 4});

  for (const Fold& f : folds) {
    std::vector<std::size_t> all = f.train;
    all.insert(all.end(), f.test.begin(), f.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(subj.size());
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
  }
}

TEST_CASE("loocv folds reject degenerate inputs") {
  CHECK_THROWS_AS(loocv_folds({}), config_error);
  CHECK_THROWS_AS(loocv_folds({"only", "only", "only"}), config_error);
}

TEST_CASE("bootstrap balancing keeps originals and appends by class") {
  const std::vector<std::size_t> labels{0, 1, 1, 2, 1, 0};
  Rng rng(11);
  const auto idx = bootstrap_balance(labels, rng);

  // Majority class has 3 members, so classes 0 and 2 gain 1 and 2 draws.
  REQUIRE(idx.size() == 9);
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(idx[i] == i);
  CHECK(labels[idx[6]] == 0);
  CHECK(labels[idx[7]] == 2);
  CHECK(labels[idx[8]] == 2);

  std::vector<std::size_t> counts(3, 0);
  for (std::size_t i : idx) ++counts[labels[i]];
  CHECK(counts == std::vector<std::size_t>{3, 3, 3});
}

TEST_CASE("bootstrap balancing is a no-op on balanced labels") {
  const std::vector<std::size_t> labels{1, 0, 1, 0};
  Rng rng(5);
  const auto idx = bootstrap_balance(labels, rng);
  CHECK(idx == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("bootstrap balancing is seed-deterministic") {
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 8; ++i) labels.push_back(0);
  for (std::size_t i = 0; i < 24; ++i) labels.push_back(1);

  Rng a(31), b(31), c(32);
  const auto ia = bootstrap_balance(labels, a);
  const auto ib = bootstrap_balance(labels, b);
  const auto ic = bootstrap_balance(labels, c);
  CHECK(ia == ib);
  CHECK(ia != ic);

  // Every appended draw must come from the upsampled class.
  REQUIRE(ia.size() == 48);
  for (std::size_t i = labels.size(); i < ia.size(); ++i) {
    CHECK(ia[i] < 8);
  }
}

TEST_CASE("bootstrap balancing rejects gaps and empty input") {
  Rng rng(1);
  CHECK_THROWS_AS(bootstrap_balance({}, rng), config_error);
  CHECK_THROWS_AS(bootstrap_balance({0, 2, 2}, rng), config_error);
}

TEST_CASE("random split produces the documented 64/16/20 partition") {
  Rng rng(2024);
  const SplitIndices s = split_random(3048, rng);
  CHECK(s.test.size() == 610);
  CHECK(s.val.size() == 488);
  CHECK(s.train.size() == 1950);

  CHECK(std::is_sorted(s.train.begin(), s.train.end()));
  CHECK(std::is_sorted(s.val.begin(), s.val.end()));
  CHECK(std::is_sorted(s.test.begin(), s.test.end()));

  std::vector<std::size_t> all;
  all.insert(all.end(), s.train.begin(), s.train.end());
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(3048);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);

  Rng again(2024);
  const SplitIndices s2 = split_random(3048, again);
  CHECK(s2.test == s.test);
  CHECK(s2.val == s.val);
  CHECK(s2.train == s.train);

  Rng other(2025);
  CHECK(split_random(3048, other).test != s.test);
}

TEST_CASE("random split boundary sizes") {
  Rng rng(7);
  const SplitIndices s = split_random(5, rng);
  CHECK(s.test.size() == 1);
  CHECK(s.val.size() == 1);
  CHECK(s.train.size() == 3);

  Rng bad(7);
  CHECK_THROWS_AS(split_random(4, bad), config_error);
}

TEST_CASE("training drives the loss down on separable blobs") {
  Tensor x;
  std::vector<std::size_t> y;
  make_blobs(24, 4, x, y, 900);
  nn::Network net = make_mlp(4, 8, 2, 901);

  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.batch_size = 16;
  cfg.lr0 = 5e-3;

  Rng rng(902);
  const TrainLog log = train_network(net, x, y, cfg, rng);
  REQUIRE(log.epoch_loss.size() == 40);
  REQUIRE(log.lr_after_epoch.size() == 40);
  CHECK(log.epoch_loss.back() < 0.5 * log.epoch_loss.front());
  for (double l : log.epoch_loss) CHECK(std::isfinite(l));
}

TEST_CASE("training stops early once the loss target is reached") {
  Tensor x;
  std::vector<std::size_t> y;
  make_blobs(16, 3, x, y, 910);
  nn::Network net = make_mlp(3, 6, 2, 911);

  TrainConfig cfg;
  cfg.max_epochs = 100;
  cfg.batch_size = 8;
  cfg.early_stop_loss = 100.0;  // any first epoch satisfies this

  Rng rng(912);
  const TrainLog log = train_network(net, x, y, cfg, rng);
  CHECK(log.epoch_loss.size() == 1);
}

TEST_CASE("trailing single-sample batches are skipped") {
  // Batch norm would reject a 1-sample training batch, so 5 samples at
  // batch size 2 only work if the odd remainder is dropped.
  Tensor x({5, 3});
  Rng fill(920);
  for (double& v : x.data) v = fill.normal();
  const std::vector<std::size_t> y{0, 1, 0, 1, 0};

  nn::Network net;
  net.add(std::make_unique<nn::Dense>("fc1", 3, 4));
  net.add(std::make_unique<nn::BatchNorm>("bn1", 4));
  net.add(std::make_unique<nn::Dense>("fc2", 4, 2));
  init_net(net, 921);

  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 2;
  Rng rng(922);
  const TrainLog log = train_network(net, x, y, cfg, rng);
  CHECK(log.epoch_loss.size() == 3);
}

TEST_CASE("training validates its inputs") {
  Tensor x({4, 3});
  const std::vector<std::size_t> y{0, 1, 0, 1};
  nn::Network net = make_mlp(3, 4, 2, 930);
  Rng rng(931);

  TrainConfig cfg;
  cfg.batch_size = 1;
  CHECK_THROWS_AS(train_network(net, x, y, cfg, rng), config_error);

  cfg.batch_size = 4;
  cfg.max_epochs = 0;
  CHECK_THROWS_AS(train_network(net, x, y, cfg, rng), config_error);

  cfg.max_epochs = 1;
  CHECK_THROWS_AS(train_network(net, x, {0, 1}, cfg, rng), config_error);

  Tensor one({1, 3});
  CHECK_THROWS_AS(train_network(net, one, {0}, cfg, rng), config_error);
}

TEST_CASE("evaluation is batch-size invariant and self-consistent") {
  Tensor x;
  std::vector<std::size_t> y;
  make_blobs(7, 4, x, y, 940);  // 14 samples
  nn::Network net = make_mlp(4, 8, 3, 941);

  const EvalOutput small = evaluate_network(net, x, 3);
  const EvalOutput big = evaluate_network(net, x, 64);

  REQUIRE(small.predictions.size() == 14);
  REQUIRE(small.scores.size() == 14);
  CHECK(small.predictions == big.predictions);
  CHECK(small.scores == big.scores);

  for (std::size_t i = 0; i < small.scores.size(); ++i) {
    const auto& row = small.scores[i];
    REQUIRE(row.size() == 3);
    double sum = 0.0;
    std::size_t best = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      sum += row[j];
      if (row[j] > row[best]) best = j;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(small.predictions[i] == best);
  }
}

TEST_CASE("evaluation validates its inputs") {
  nn::Network net = make_mlp(4, 8, 3, 950);
  Tensor x({2, 4});
  CHECK_THROWS_AS(evaluate_network(net, x, 0), config_error);
  Tensor empty({0, 4});
  CHECK_THROWS_AS(evaluate_network(net, empty), config_error);
}

TEST_CASE("alignment pipeline runs leave-one-subject-out end to end") {
  SynthSpec spec;
  spec.n_subjects = 3;
  spec.runs_per_subject = 1;
  spec.timepoints_per_run = 40;
  spec.n_voxels_latent = 8;
  spec.dims = {4, 4, 3};
  spec.class_signal_amplitude = 1.5;
  spec.noise_sigma = 0.05;
  spec.seed = 77;
  const Dataset data = make_synth_dataset(spec);

  PipelineAOptions opt;
  opt.n_voxels = 10;
  opt.q_passes = 2;
  opt.ref_subject = 0;
  opt.model.input_len = 10;
  opt.model.n_classes = 3;
  opt.model.conv_filters = {2};
  opt.model.kernel = 3;
  opt.model.fc_widths = {8, 3};
  opt.model.conv_dropout = 0.1;
  opt.model.fc_dropout = 0.2;
  opt.model.fc_dropout_layers = 1;
  opt.model.expected_flatten = 16;  // 2 filters x (10 - 2)
  opt.max_epochs = 3;
  opt.batch_size = 8;

  const PipelineAResult res = run_pipeline_a(data, opt, 123);
  REQUIRE(res.folds.size() == 3);
  CHECK(res.folds[0].held_out_subject == "sub-01");
  CHECK(res.folds[1].held_out_subject == "sub-02");
  CHECK(res.folds[2].held_out_subject == "sub-03");

  double pooled_total = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      pooled_total += res.pooled_confusion(i, j);
  CHECK(pooled_total == 120.0);  // 3 folds x 40 held-out volumes

  double acc_sum = 0.0;
  for (const FoldResult& f : res.folds) {
    CHECK(f.predictions.y_true.size() == 40);
    CHECK(f.predictions.y_pred.size() == 40);
    CHECK(f.epoch_loss.size() == 3);
    CHECK(f.metrics.accuracy >= 0.0);
    CHECK(f.metrics.accuracy <= 1.0);
    acc_sum += f.metrics.accuracy;
  }
  CHECK(res.mean_accuracy == doctest::Approx(acc_sum / 3.0).epsilon(1e-15));

  SUBCASE("identical seeds reproduce the result bit for bit") {
    const PipelineAResult res2 = run_pipeline_a(data, opt, 123);
    CHECK(res2.mean_accuracy == res.mean_accuracy);
    CHECK(res2.sd_accuracy == res.sd_accuracy);
    CHECK(same_matrix(res2.pooled_confusion, res.pooled_confusion));
    for (std::size_t f = 0; f < res.folds.size(); ++f) {
      CHECK(res2.folds[f].predictions.y_pred == res.folds[f].predictions.y_pred);
      CHECK(res2.folds[f].epoch_loss == res.folds[f].epoch_loss);
    }
  }

  SUBCASE("a different seed changes the training trajectory") {
    const PipelineAResult res2 = run_pipeline_a(data, opt, 124);
    bool any_diff = false;
    for (std::size_t f = 0; f < res.folds.size() && !any_diff; ++f)
      any_diff = res2.folds[f].epoch_loss != res.folds[f].epoch_loss;
    CHECK(any_diff);
  }

  SUBCASE("identity ablation runs under the same contract") {
    PipelineAOptions ab = opt;
    ab.identity_alignment = true;
    const PipelineAResult res2 = run_pipeline_a(data, ab, 123);
    CHECK(res2.folds.size() == 3);
    CHECK(res2.folds[0].predictions.y_true.size() == 40);
  }
}

TEST_CASE("alignment pipeline rejects inconsistent configuration") {
  SynthSpec spec;
  spec.n_subjects = 2;
  spec.runs_per_subject = 1;
  spec.timepoints_per_run = 40;
  spec.n_voxels_latent = 6;
  spec.dims = {4, 4, 3};
  spec.seed = 70;
  const Dataset data = make_synth_dataset(spec);

  PipelineAOptions opt;
  opt.n_voxels = 10;
  opt.model.input_len = 10;
  opt.model.conv_filters = {2};
  opt.model.kernel = 3;
  opt.model.fc_widths = {8, 3};
  opt.model.expected_flatten = 0;
  opt.max_epochs = 1;

  SUBCASE("model width must match the voxel screen") {
    opt.model.input_len = 12;
    CHECK_THROWS_AS(run_pipeline_a(data, opt, 1), config_error);
  }
  SUBCASE("zero voxels") {
    opt.n_voxels = 0;
    CHECK_THROWS_AS(run_pipeline_a(data, opt, 1), config_error);
  }
  SUBCASE("zero alignment passes") {
    opt.q_passes = 0;
    CHECK_THROWS_AS(run_pipeline_a(data, opt, 1), config_error);
  }
  SUBCASE("model must cover the three conditions") {
    opt.model.n_classes = 2;
    opt.model.fc_widths = {8, 2};
    CHECK_THROWS_AS(run_pipeline_a(data, opt, 1), config_error);
  }
  SUBCASE("reference index beyond the training subjects") {
    opt.ref_subject = 1;  // folds leave 1 training subject for p = 2
    CHECK_THROWS_AS(run_pipeline_a(data, opt, 1), config_error);
  }
  SUBCASE("screen cannot keep more voxels than the mask") {
    opt.n_voxels = data.mask.n_kept() + 1;
    opt.model.input_len = opt.n_voxels;
    CHECK_THROWS_AS(run_pipeline_a(data, opt, 1), config_error);
  }
  SUBCASE("empty dataset") {
    Dataset empty;
    empty.mask = data.mask;
    CHECK_THROWS_AS(run_pipeline_a(empty, opt, 1), config_error);
  }
}

TEST_CASE("volumetric pipeline pools the two task conditions") {
  SynthSpec spec;
  spec.n_subjects = 4;
  spec.runs_per_subject = 1;
  spec.timepoints_per_run = 40;
  spec.n_voxels_latent = 8;
  spec.dims = {4, 4, 3};
  spec.class_signal_amplitude = 1.5;
  spec.noise_sigma = 0.05;
  spec.shared_mixing = true;
  spec.seed = 99;
  const Dataset data = make_synth_dataset(spec);

  PipelineBOptions opt;
  opt.model = ModelBConfig::tiny();
  opt.model.penultimate = 16;
  opt.repeats = 2;
  opt.max_epochs = 2;
  opt.batch_size = 8;

  const PipelineBResult res = run_pipeline_b(data, opt, 321);
  // 4 runs x 40 volumes, half of them rest and excluded.
  CHECK(res.n_samples == 80);
  CHECK(res.n_test == 16);
  CHECK(res.n_val == 13);
  CHECK(res.n_train == 51);

  REQUIRE(res.repeats.size() == 2);
  double acc_sum = 0.0;
  for (const RepeatResult& r : res.repeats) {
    double conf_total = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        conf_total += r.test_metrics.confusion(i, j);
    CHECK(conf_total == 16.0);
    CHECK(r.val_accuracy >= 0.0);
    CHECK(r.val_accuracy <= 1.0);
    CHECK(r.epoch_loss.size() == 2);
    acc_sum += r.test_metrics.accuracy;
  }
  CHECK(res.mean_accuracy == doctest::Approx(acc_sum / 2.0).epsilon(1e-15));

  SUBCASE("identical seeds reproduce the result bit for bit") {
    const PipelineBResult res2 = run_pipeline_b(data, opt, 321);
    CHECK(res2.mean_accuracy == res.mean_accuracy);
    for (std::size_t r = 0; r < res.repeats.size(); ++r) {
      CHECK(res2.repeats[r].test_predictions.y_pred ==
            res.repeats[r].test_predictions.y_pred);
      CHECK(res2.repeats[r].epoch_loss == res.repeats[r].epoch_loss);
    }
  }

  SUBCASE("run grouping keeps whole runs in one split") {
    PipelineBOptions grouped = opt;
    grouped.group_by_run = true;
    const PipelineBResult res2 = run_pipeline_b(data, grouped, 321);
    // Runs hold 20 task volumes each, so splits fill run by run.
    CHECK(res2.n_test == 20);
    CHECK(res2.n_val == 20);
    CHECK(res2.n_train == 40);
  }
}

TEST_CASE("volumetric pipeline rejects bad configuration") {
  SynthSpec spec;
  spec.n_subjects = 2;
  spec.runs_per_subject = 1;
  spec.timepoints_per_run = 40;
  spec.n_voxels_latent = 6;
  spec.dims = {4, 4, 3};
  spec.shared_mixing = true;
  spec.seed = 71;
  const Dataset data = make_synth_dataset(spec);

  PipelineBOptions opt;
  opt.model = ModelBConfig::tiny();
  opt.model.penultimate = 16;
  opt.repeats = 1;
  opt.max_epochs = 1;
  opt.batch_size = 8;

  SUBCASE("zero repeats") {
    opt.repeats = 0;
    CHECK_THROWS_AS(run_pipeline_b(data, opt, 1), config_error);
  }
  SUBCASE("model must be binary") {
    opt.model.n_classes = 3;
    CHECK_THROWS_AS(run_pipeline_b(data, opt, 1), config_error);
  }
  SUBCASE("empty dataset") {
    Dataset empty;
    empty.mask = data.mask;
    CHECK_THROWS_AS(run_pipeline_b(empty, opt, 1), config_error);
  }
  SUBCASE("rest-only runs leave nothing to classify") {
    Dataset rest;
    rest.mask = data.mask;
    VolumeSeries run;
    run.subject_id = "sub-01";
    run.run_id = "run-01";
    run.dims = spec.dims;
    for (int t = 0; t < 4; ++t) {
      Volume v;
      v.dims = spec.dims;
      v.voxels.assign(spec.dims.count(), 0.0);
      run.volumes.push_back(std::move(v));
      run.labels.push_back(kRest);
    }
    rest.runs.push_back(std::move(run));
    CHECK_THROWS_AS(run_pipeline_b(rest, opt, 1), config_error);
  }
}
