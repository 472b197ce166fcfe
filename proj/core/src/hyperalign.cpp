#include "voxstate/hyperalign.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "voxstate/svd.hpp"

namespace voxstate {
namespace {

void check_uniform_shapes(const std::vector<SubjectMatrix>& subjects) {
  for (std::size_t j = 1; j < subjects.size(); ++j)
    if (!subjects[j].x.same_shape(subjects[0].x))
      throw config_error("hyperalign: subject " + subjects[j].subject_id +
                         " shape differs from subject " +
                         subjects[0].subject_id);
}

Matrix identity(std::size_t m) {
  Matrix i(m, m);
  for (std::size_t r = 0; r < m; ++r) i(r, r) = 1.0;
  return i;
}

Matrix mean_of(const std::vector<Matrix>& mats) {
  Matrix mean(mats[0].rows(), mats[0].cols());
  const double inv = 1.0 / static_cast<double>(mats.size());
  for (const Matrix& m : mats)
    for (std::size_t i = 0; i < mean.size(); ++i)
      mean.data()[i] += m.data()[i];
  for (std::size_t i = 0; i < mean.size(); ++i) mean.data()[i] *= inv;
  return mean;
}

}  // namespace

ProcrustesResult procrustes_rotation(const Matrix& x, const Matrix& t) {
  if (!x.same_shape(t))
    throw config_error("procrustes_rotation: shapes disagree, " +
                       std::to_string(x.rows()) + "x" +
                       std::to_string(x.cols()) + " vs " +
                       std::to_string(t.rows()) + "x" +
                       std::to_string(t.cols()));
  const Matrix cross = matmul_at_b(x, t);
  SvdResult s = svd(cross);

  ProcrustesResult out;
  out.rotation = matmul_a_bt(s.u, s.v);
  const double sigma_max = s.singular_values.front();
  const double sigma_min = s.singular_values.back();
  out.unique = sigma_max > 0.0 && sigma_min > 1e-12 * sigma_max;
  return out;
}

AlignmentStep level1_align(const std::vector<SubjectMatrix>& subjects,
                           std::size_t ref_index) {
  if (subjects.size() < 2)
    throw config_error("level1_align: need at least 2 subjects");
  if (ref_index >= subjects.size())
    throw config_error("level1_align: ref_index out of range");
  check_uniform_shapes(subjects);

  const std::size_t m = subjects[0].x.cols();
  AlignmentStep step;
  step.rotations.resize(subjects.size());
  step.aligned.resize(subjects.size());
  step.reference = subjects[ref_index].x;

  std::size_t blended = 0;
  for (std::size_t j = 0; j < subjects.size(); ++j) {
    if (j == ref_index) {
      step.rotations[j] = identity(m);
      step.aligned[j] = subjects[j].x;
      continue;
    }
    step.rotations[j] =
        procrustes_rotation(subjects[j].x, step.reference).rotation;
    step.aligned[j] = matmul(subjects[j].x, step.rotations[j]);

    // Running mean: the i-th blended subject enters with weight 1/(i+1).
    ++blended;
    const double w = 1.0 / static_cast<double>(blended + 1);
    for (std::size_t i = 0; i < step.reference.size(); ++i)
      step.reference.data()[i] = w * step.aligned[j].data()[i] +
                                 (1.0 - w) * step.reference.data()[i];
  }
  return step;
}

AlignmentStep level2_refine(const std::vector<Matrix>& aligned,
                            const Matrix& reference, std::size_t q) {
  const std::size_t p = aligned.size();
  if (p < 2) throw config_error("level2_refine: need at least 2 subjects");
  if (q < 1) throw config_error("level2_refine: q must be >= 1");
  for (const Matrix& a : aligned)
    if (!a.same_shape(reference))
      throw config_error("level2_refine: aligned/reference shape mismatch");

  const std::size_t m = reference.cols();
  AlignmentStep step;
  step.aligned = aligned;
  step.reference = reference;
  step.rotations.assign(p, identity(m));

  Matrix t_tmp(reference.rows(), m);
  for (std::size_t pass = 0; pass < q; ++pass) {
    // The leave-one-out reference is built from the pass-start mean;
    // subjects updated earlier in this pass do not shift it.
    const Matrix t_snapshot = step.reference;
    for (std::size_t j = 0; j < p; ++j) {
      const double pd = static_cast<double>(p);
      for (std::size_t i = 0; i < t_tmp.size(); ++i)
        t_tmp.data()[i] = (pd * t_snapshot.data()[i] -
                           step.aligned[j].data()[i]) /
                          (pd - 1.0);
      Matrix r = procrustes_rotation(step.aligned[j], t_tmp).rotation;
      step.aligned[j] = matmul(step.aligned[j], r);
      step.rotations[j] = matmul(step.rotations[j], r);
    }
    step.reference = mean_of(step.aligned);
  }
  return step;
}

CommonSpace hyperalign_fit(const std::vector<SubjectMatrix>& subjects,
                           const HyperalignOptions& options,
                           const FeatureSelection& selection) {
  if (subjects.size() < 2)
    throw config_error("hyperalign_fit: need at least 2 training subjects");
  check_uniform_shapes(subjects);

  std::vector<SubjectMatrix> normalized = subjects;
  for (SubjectMatrix& s : normalized) frobenius_normalize(s.x);

  AlignmentStep l1 = level1_align(normalized, options.ref_index);
  AlignmentStep l2 = level2_refine(l1.aligned, l1.reference, options.q);

  CommonSpace space;
  space.t = std::move(l2.reference);
  frobenius_normalize(space.t);
  space.selection = selection;
  space.q = options.q;
  for (std::size_t i = 1; i < subjects.size(); ++i)
    space.w_schedule.push_back(1.0 / static_cast<double>(i + 1));

  // Publish direct solves against the final reference rather than the
  // accumulated per-level products, so transform() on a training
  // subject reproduces the stored rotation bit for bit.
  for (const SubjectMatrix& s : normalized) {
    space.subject_ids.push_back(s.subject_id);
    space.rotations.push_back(procrustes_rotation(s.x, space.t).rotation);
  }
  return space;
}

Matrix hyperalign_transform(const CommonSpace& space,
                            const SubjectMatrix& subject) {
  if (!subject.x.same_shape(space.t))
    throw config_error("hyperalign_transform: subject " + subject.subject_id +
                       " shape does not match the reference");
  Matrix x = subject.x;
  frobenius_normalize(x);
  Matrix r = procrustes_rotation(x, space.t).rotation;
  return matmul(x, r);
}

double mean_pairwise_correlation(const std::vector<Matrix>& mats) {
  if (mats.size() < 2)
    throw config_error("mean_pairwise_correlation: need at least 2 matrices");
  const std::size_t n = mats[0].size();
  std::vector<double> means(mats.size());
  for (std::size_t i = 0; i < mats.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += mats[i].data()[k];
    means[i] = s / static_cast<double>(n);
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    for (std::size_t j = i + 1; j < mats.size(); ++j) {
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double a = mats[i].data()[k] - means[i];
        const double b = mats[j].data()[k] - means[j];
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
      }
      if (sxx == 0.0 || syy == 0.0)
        throw numeric_error("mean_pairwise_correlation: constant matrix");
      total += sxy / std::sqrt(sxx * syy);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

void write_common_space(const std::string& path, const CommonSpace& space) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot open for writing: " + path);

  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_f64 = [&](double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u32(static_cast<std::uint32_t>(bits));
    put_u32(static_cast<std::uint32_t>(bits >> 32));
  };

  out.write("HALN", 4);
  put_u32(1);
  put_u32(static_cast<std::uint32_t>(space.t.rows()));
  put_u32(static_cast<std::uint32_t>(space.t.cols()));
  put_u32(static_cast<std::uint32_t>(space.rotations.size()));
  for (std::size_t i = 0; i < space.t.size(); ++i) put_f64(space.t.data()[i]);
  for (const Matrix& r : space.rotations) {
    if (r.rows() != space.t.cols() || r.cols() != space.t.cols())
      throw config_error("write_common_space: rotation shape mismatch");
    for (std::size_t i = 0; i < r.size(); ++i) put_f64(r.data()[i]);
  }

  nlohmann::json j;
  j["m"] = space.selection.m;
  j["indices"] = space.selection.indices;
  nlohmann::json scores = nlohmann::json::array();
  for (double s : space.selection.f_scores) {
    if (std::isinf(s))
      scores.push_back(nullptr);
    else
      scores.push_back(s);
  }
  j["f_scores"] = std::move(scores);
  const std::string json = j.dump();
  put_u32(static_cast<std::uint32_t>(json.size()));
  out.write(json.data(), static_cast<std::streamsize>(json.size()));
  out.close();
  if (!out) throw format_error("write failed: " + path);
}

CommonSpace read_common_space(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open: " + path);
  std::size_t offset = 0;

  auto need = [&](void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw format_error(path + ": truncated at offset " +
                         std::to_string(offset));
    offset += n;
  };
  auto get_u32 = [&]() {
    unsigned char b[4];
    need(b, 4);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  };
  auto get_f64 = [&]() {
    std::uint64_t lo = get_u32();
    std::uint64_t hi = get_u32();
    std::uint64_t bits = lo | (hi << 32);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  };

  char magic[4];
  need(magic, 4);
  if (std::memcmp(magic, "HALN", 4) != 0)
    throw format_error(path + ": bad magic at offset 0, expected \"HALN\"");
  const std::uint32_t version = get_u32();
  if (version != 1)
    throw format_error(path + ": unsupported version " +
                       std::to_string(version) + " at offset 4");

  const std::uint32_t n = get_u32();
  const std::uint32_t m = get_u32();
  const std::uint32_t p = get_u32();

  CommonSpace space;
  space.t = Matrix(n, m);
  for (std::size_t i = 0; i < space.t.size(); ++i)
    space.t.data()[i] = get_f64();
  for (std::uint32_t r = 0; r < p; ++r) {
    Matrix rot(m, m);
    for (std::size_t i = 0; i < rot.size(); ++i) rot.data()[i] = get_f64();
    space.rotations.push_back(std::move(rot));
  }

  const std::uint32_t json_len = get_u32();
  std::string json(json_len, '\0');
  need(json.data(), json_len);
  try {
    nlohmann::json j = nlohmann::json::parse(json);
    space.selection.m = j["m"].get<std::size_t>();
    space.selection.indices = j["indices"].get<std::vector<std::size_t>>();
    for (const auto& s : j["f_scores"]) {
      if (s.is_null())
        space.selection.f_scores.push_back(
            std::numeric_limits<double>::infinity());
      else
        space.selection.f_scores.push_back(s.get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": embedded selection JSON invalid: " +
                       e.what());
  }
  return space;
}

}  // namespace voxstate
