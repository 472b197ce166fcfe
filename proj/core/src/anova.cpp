#include "voxstate/anova.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

namespace voxstate {

void FeatureSelection::validate() const {
  if (indices.size() != m)
    throw config_error("FeatureSelection: index count " +
                       std::to_string(indices.size()) + " != m " +
                       std::to_string(m));
  for (std::size_t i = 0; i + 1 < indices.size(); ++i)
    if (indices[i] >= indices[i + 1])
      throw config_error("FeatureSelection: indices not strictly ascending");
  if (!indices.empty() && indices.back() >= f_scores.size())
    throw config_error("FeatureSelection: index out of range");
}

std::vector<double> f_scores(const Matrix& x, const std::vector<int>& y) {
  if (y.size() != x.rows())
    throw config_error("f_scores: " + std::to_string(y.size()) +
                       " labels for " + std::to_string(x.rows()) + " rows");

  // Group rows by label value.
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < y.size(); ++i) groups[y[i]].push_back(i);
  if (groups.size() < 2)
    throw numeric_error("f_scores: need at least 2 classes, got " +
                        std::to_string(groups.size()));
  for (const auto& [label, rows] : groups)
    if (rows.size() < 2)
      throw numeric_error("f_scores: class " + std::to_string(label) +
                          " has only " + std::to_string(rows.size()) +
                          " sample(s), need at least 2");

  const std::size_t n = x.rows();
  const std::size_t v = x.cols();
  const std::size_t c = groups.size();

  std::vector<double> scores(v);
  std::vector<double> class_mean(c);
  const double df_between = static_cast<double>(c - 1);
  const double df_within = static_cast<double>(n - c);

  for (std::size_t col = 0; col < v; ++col) {
    double grand_sum = 0.0;
    std::size_t g = 0;
    for (const auto& [label, rows] : groups) {
      double s = 0.0;
      for (std::size_t r : rows) s += x(r, col);
      class_mean[g] = s / static_cast<double>(rows.size());
      grand_sum += s;
      ++g;
    }
    const double grand_mean = grand_sum / static_cast<double>(n);

    double ssb = 0.0, ssw = 0.0;
    g = 0;
    for (const auto& [label, rows] : groups) {
      const double dm = class_mean[g] - grand_mean;
      ssb += static_cast<double>(rows.size()) * dm * dm;
      for (std::size_t r : rows) {
        const double d = x(r, col) - class_mean[g];
        ssw += d * d;
      }
      ++g;
    }

    if (ssw == 0.0) {
      scores[col] =
          (ssb == 0.0) ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      scores[col] = (ssb / df_between) / (ssw / df_within);
    }
  }
  return scores;
}

FeatureSelection select_top_m(const std::vector<double>& f, std::size_t m) {
  if (m > f.size())
    throw config_error("select_top_m: m " + std::to_string(m) +
                       " exceeds voxel count " + std::to_string(f.size()));
  std::vector<std::size_t> order(f.size());
  std::iota(order.begin(), order.end(), 0);
  // Higher F first; equal F falls back to the lower index.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
  order.resize(m);
  std::sort(order.begin(), order.end());

  FeatureSelection sel;
  sel.m = m;
  sel.indices = std::move(order);
  sel.f_scores = f;
  sel.validate();
  return sel;
}

void write_feature_selection(const std::string& path,
                             const FeatureSelection& sel) {
  sel.validate();
  nlohmann::json j;
  j["m"] = sel.m;
  j["indices"] = sel.indices;
  nlohmann::json scores = nlohmann::json::array();
  for (double s : sel.f_scores) {
    if (std::isinf(s))
      scores.push_back(nullptr);
    else
      scores.push_back(s);
  }
  j["f_scores"] = std::move(scores);

  std::ofstream out(path);
  if (!out) throw format_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw format_error("write failed: " + path);
}

FeatureSelection read_feature_selection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": invalid JSON: " + e.what());
  }
  try {
    FeatureSelection sel;
    sel.m = j["m"].get<std::size_t>();
    sel.indices = j["indices"].get<std::vector<std::size_t>>();
    for (const auto& s : j["f_scores"]) {
      if (s.is_null())
        sel.f_scores.push_back(std::numeric_limits<double>::infinity());
      else
        sel.f_scores.push_back(s.get<double>());
    }
    sel.validate();
    return sel;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": missing or mistyped field: " + e.what());
  }
}

Matrix select_columns(const Matrix& x,
                      const std::vector<std::size_t>& indices) {
  for (std::size_t idx : indices)
    if (idx >= x.cols())
      throw config_error("select_columns: index " + std::to_string(idx) +
                         " out of range for " + std::to_string(x.cols()) +
                         " columns");
  Matrix out(x.rows(), indices.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < indices.size(); ++j)
      out(r, j) = x(r, indices[j]);
  return out;
}

}  // namespace voxstate
