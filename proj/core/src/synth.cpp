#include "voxstate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "voxstate/svd.hpp"

namespace voxstate {
namespace {

// Stream ids for Rng::derive, so every random ingredient is independent
// of the others and of consumption order.
constexpr std::uint64_t kStreamLatent = 1;
constexpr std::uint64_t kStreamPlacement = 2;
constexpr std::uint64_t kStreamMixingBase = 10;
constexpr std::uint64_t kStreamNoiseBase = 1000;

BrainMask ellipsoid_mask(VolumeDims dims) {
  BrainMask m;
  m.dims = dims;
  m.keep.assign(dims.count(), 0);
  const double cx = (dims.nx - 1) / 2.0;
  const double cy = (dims.ny - 1) / 2.0;
  const double cz = (dims.nz - 1) / 2.0;
  const double ax = 0.45 * dims.nx;
  const double ay = 0.45 * dims.ny;
  const double az = 0.45 * dims.nz;
  std::size_t i = 0;
  for (std::uint32_t z = 0; z < dims.nz; ++z)
    for (std::uint32_t y = 0; y < dims.ny; ++y)
      for (std::uint32_t x = 0; x < dims.nx; ++x, ++i) {
        const double dx = (x - cx) / ax;
        const double dy = (y - cy) / ay;
        const double dz = (z - cz) / az;
        if (dx * dx + dy * dy + dz * dz <= 1.0) m.keep[i] = 1;
      }
  return m;
}

std::string two_digit_id(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%02zu", prefix, n);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_subjects < 1 || runs_per_subject < 1 || timepoints_per_run < 1 ||
      n_voxels_latent < 1)
    throw config_error("SynthSpec: all counts must be >= 1");
  if (noise_sigma < 0)
    throw config_error("SynthSpec: noise_sigma must be >= 0");
  if (dims.count() == 0) throw config_error("SynthSpec: empty volume dims");
}

std::vector<int> block_design_labels(std::size_t n_timepoints) {
  // 10-volume blocks cycling rest, neutral, rest, negative.
  static constexpr int kCycle[4] = {kRest, kNeutral, kRest, kNegative};
  std::vector<int> labels(n_timepoints);
  for (std::size_t t = 0; t < n_timepoints; ++t)
    labels[t] = kCycle[(t / 10) % 4];
  return labels;
}

SynthResult synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t k = spec.n_voxels_latent;

  SynthResult out;
  out.truth.mask = ellipsoid_mask(spec.dims);
  const std::size_t n_kept = out.truth.mask.n_kept();
  if (k > n_kept)
    throw config_error("synth_generate: n_voxels_latent " + std::to_string(k) +
                       " exceeds kept voxel count " + std::to_string(n_kept));

  const Rng base(spec.seed);

  // Latent class means, amplitude folded in. Entry scale amplitude/sqrt(k)
  // puts each class mean at distance ~amplitude from the origin.
  Rng latent_rng = base.derive(kStreamLatent);
  out.truth.class_means = Matrix(kNumConditions, k);
  fill_normal(out.truth.class_means, latent_rng,
              spec.class_signal_amplitude / std::sqrt(static_cast<double>(k)));

  // Informative voxels: one contiguous window of kept positions.
  Rng placement_rng = base.derive(kStreamPlacement);
  const std::size_t offset = placement_rng.uniform_below(n_kept - k + 1);
  out.truth.informative_columns.resize(k);
  for (std::size_t i = 0; i < k; ++i)
    out.truth.informative_columns[i] = offset + i;

  out.truth.class_signal_amplitude = spec.class_signal_amplitude;
  out.truth.noise_sigma = spec.noise_sigma;

  const std::vector<std::size_t> kept = out.truth.mask.kept_indices();
  const std::vector<int> labels = block_design_labels(spec.timepoints_per_run);

  for (std::size_t j = 0; j < spec.n_subjects; ++j) {
    Rng mix_rng =
        base.derive(kStreamMixingBase + (spec.shared_mixing ? 0 : j));
    Matrix q = random_orthogonal(k, mix_rng);

    // Mixed per-class signal rows for this subject, computed once so
    // every timepoint of a class carries the identical pattern.
    Matrix patterns = matmul(out.truth.class_means, q);

    out.truth.subject_ids.push_back(two_digit_id("sub", j + 1));
    out.truth.mixing.push_back(std::move(q));

    const std::size_t n_runs =
        spec.mixed_runs ? (j % spec.runs_per_subject) + 1
                        : spec.runs_per_subject;
    for (std::size_t r = 0; r < n_runs; ++r) {
      Rng noise_rng = base.derive(kStreamNoiseBase + j * 64 + r);
      VolumeSeries series;
      series.subject_id = out.truth.subject_ids.back();
      series.run_id = two_digit_id("run", r + 1);
      series.dims = spec.dims;
      series.labels = labels;
      series.volumes.reserve(spec.timepoints_per_run);
      for (std::size_t t = 0; t < spec.timepoints_per_run; ++t) {
        Volume v;
        v.dims = spec.dims;
        v.voxels.assign(spec.dims.count(), 0.0);
        for (std::size_t ki = 0; ki < n_kept; ++ki)
          v.voxels[kept[ki]] = spec.noise_sigma * noise_rng.normal();
        const int label = labels[t];
        for (std::size_t i = 0; i < k; ++i)
          v.voxels[kept[offset + i]] += patterns(label, i);
        series.volumes.push_back(std::move(v));
      }
      out.runs.push_back(std::move(series));
    }
  }
  return out;
}

double bayes_accuracy(const std::vector<VolumeSeries>& runs,
                      const GroundTruth& truth,
                      const std::vector<int>& classes) {
  const std::size_t k = truth.informative_columns.size();
  std::size_t total = 0, correct = 0;
  for (const VolumeSeries& series : runs) {
    auto it = std::find(truth.subject_ids.begin(), truth.subject_ids.end(),
                        series.subject_id);
    if (it == truth.subject_ids.end())
      throw config_error("bayes_accuracy: unknown subject " +
                         series.subject_id);
    const Matrix& q =
        truth.mixing[static_cast<std::size_t>(it - truth.subject_ids.begin())];

    Matrix x = apply_mask(series, truth.mask);
    Matrix x_inf(x.rows(), k);
    for (std::size_t t = 0; t < x.rows(); ++t)
      for (std::size_t i = 0; i < k; ++i)
        x_inf(t, i) = x(t, truth.informative_columns[i]);
    // Unmix back into the common space: z = x_inf * Q^T.
    Matrix z = matmul_a_bt(x_inf, q);

    for (std::size_t t = 0; t < z.rows(); ++t) {
      const int label = series.labels[t];
      if (!classes.empty() &&
          std::find(classes.begin(), classes.end(), label) == classes.end())
        continue;
      int best_class = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < truth.class_means.rows(); ++c) {
        double dist = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          const double d = z(t, i) - truth.class_means(c, i);
          dist += d * d;
        }
        if (dist < best_dist) {
          best_dist = dist;
          best_class = static_cast<int>(c);
        }
      }
      ++total;
      correct += (best_class == label);
    }
  }
  if (total == 0) throw config_error("bayes_accuracy: no samples scored");
  return static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty())
    throw format_error(what + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw format_error(what + ": ragged row " + std::to_string(i));
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace

void write_ground_truth(const std::string& path, const GroundTruth& truth) {
  nlohmann::json j;
  j["dims"] = {truth.mask.dims.nx, truth.mask.dims.ny, truth.mask.dims.nz};
  j["mask_keep"] = truth.mask.keep;
  j["class_means"] = matrix_to_json(truth.class_means);
  j["subject_ids"] = truth.subject_ids;
  nlohmann::json mixing = nlohmann::json::array();
  for (const Matrix& q : truth.mixing) mixing.push_back(matrix_to_json(q));
  j["mixing"] = std::move(mixing);
  j["informative_columns"] = truth.informative_columns;
  j["class_signal_amplitude"] = truth.class_signal_amplitude;
  j["noise_sigma"] = truth.noise_sigma;

  std::ofstream out(path);
  if (!out) throw format_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw format_error("write failed: " + path);
}

GroundTruth read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": invalid JSON: " + e.what());
  }
  try {
    GroundTruth t;
    t.mask.dims = {j["dims"][0].get<std::uint32_t>(),
                   j["dims"][1].get<std::uint32_t>(),
                   j["dims"][2].get<std::uint32_t>()};
    t.mask.keep = j["mask_keep"].get<std::vector<std::uint8_t>>();
    t.class_means = matrix_from_json(j["class_means"], path + ": class_means");
    t.subject_ids = j["subject_ids"].get<std::vector<std::string>>();
    for (const auto& q : j["mixing"])
      t.mixing.push_back(matrix_from_json(q, path + ": mixing"));
    t.informative_columns =
        j["informative_columns"].get<std::vector<std::size_t>>();
    t.class_signal_amplitude = j["class_signal_amplitude"].get<double>();
    t.noise_sigma = j["noise_sigma"].get<double>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": missing or mistyped field: " + e.what());
  }
}

}  // namespace voxstate
