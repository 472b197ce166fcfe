#include "voxstate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace voxstate {
namespace {

RocCurve roc_one_vs_rest(const std::vector<std::size_t>& y_true,
                         const std::vector<std::vector<double>>& scores,
                         std::size_t positive_class) {
  RocCurve curve;
  curve.positive_class = positive_class;

  std::size_t n_pos = 0;
  for (std::size_t t : y_true)
    if (t == positive_class) ++n_pos;
  const std::size_t n_neg = y_true.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    curve.degenerate = true;
    return curve;
  }

  std::vector<std::pair<double, bool>> ranked(y_true.size());
  for (std::size_t i = 0; i < y_true.size(); ++i)
    ranked[i] = {scores[i][positive_class], y_true[i] == positive_class};
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  const double inf = std::numeric_limits<double>::infinity();
  curve.points.push_back({0.0, 0.0, inf});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < ranked.size()) {
    const double s = ranked[i].first;
    while (i < ranked.size() && ranked[i].first == s) {
      if (ranked[i].second)
        ++tp;
      else
        ++fp;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos),
                            s});
  }
  curve.points.push_back({1.0, 1.0, -inf});

  double area = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k)
    area += 0.5 * (curve.points[k].tpr + curve.points[k - 1].tpr) *
            (curve.points[k].fpr - curve.points[k - 1].fpr);
  curve.auroc = area;
  return curve;
}

void fill_from_confusion(MetricsReport& report) {
  const Matrix& c = report.confusion;
  const std::size_t n = c.rows();
  report.per_class.assign(n, {});

  double total = 0.0, correct = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += c(i, j);
  for (std::size_t i = 0; i < n; ++i) correct += c(i, i);
  report.accuracy = correct / total;

  for (std::size_t k = 0; k < n; ++k) {
    double row_sum = 0.0, col_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) row_sum += c(k, j);
    for (std::size_t i = 0; i < n; ++i) col_sum += c(i, k);

    ClassMetrics& m = report.per_class[k];
    if (col_sum > 0.0) {
      m.precision = c(k, k) / col_sum;
    } else {
      m.degenerate = true;
    }
    if (row_sum > 0.0) {
      m.recall = c(k, k) / row_sum;
    } else {
      m.degenerate = true;
    }
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
      m.degenerate = true;
    }
  }
}

}  // namespace

MetricsReport compute_metrics(const std::vector<std::size_t>& y_true,
                              const std::vector<std::size_t>& y_pred,
                              std::size_t n_classes,
                              const std::vector<std::vector<double>>& scores,
                              const std::vector<double>& latencies_ms) {
  if (n_classes < 2)
    throw config_error("compute_metrics: need at least two classes");
  if (y_true.empty())
    throw config_error("compute_metrics: no samples");
  if (y_true.size() != y_pred.size())
    throw config_error("compute_metrics: " + std::to_string(y_true.size()) +
                       " true labels but " + std::to_string(y_pred.size()) +
                       " predictions");
  for (std::size_t i = 0; i < y_true.size(); ++i)
    if (y_true[i] >= n_classes || y_pred[i] >= n_classes)
      throw config_error("compute_metrics: label out of range at sample " +
                         std::to_string(i));
  if (!scores.empty()) {
    if (scores.size() != y_true.size())
      throw config_error("compute_metrics: " + std::to_string(scores.size()) +
                         " score rows for " + std::to_string(y_true.size()) +
                         " samples");
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].size() != n_classes)
        throw config_error("compute_metrics: score row " + std::to_string(i) +
                           " has " + std::to_string(scores[i].size()) +
                           " entries for " + std::to_string(n_classes) +
                           " classes");
      double sum = 0.0;
      for (double s : scores[i]) sum += s;
      if (std::abs(sum - 1.0) > 1e-6)
        throw config_error("compute_metrics: score row " + std::to_string(i) +
                           " sums to " + std::to_string(sum));
    }
  }

  MetricsReport report;
  report.confusion = Matrix(n_classes, n_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i)
    report.confusion(y_true[i], y_pred[i]) += 1.0;
  fill_from_confusion(report);

  if (!scores.empty())
    for (std::size_t k = 0; k < n_classes; ++k)
      report.roc.push_back(roc_one_vs_rest(y_true, scores, k));

  if (!latencies_ms.empty()) {
    report.has_latency = true;
    double mean = 0.0;
    for (double v : latencies_ms) mean += v;
    mean /= static_cast<double>(latencies_ms.size());
    report.latency_mean_ms = mean;
    if (latencies_ms.size() > 1) {
      double ssq = 0.0;
      for (double v : latencies_ms) ssq += (v - mean) * (v - mean);
      report.latency_sd_ms =
          std::sqrt(ssq / static_cast<double>(latencies_ms.size() - 1));
    }
  }
  return report;
}

MetricsReport metrics_from_confusion(const Matrix& confusion) {
  if (confusion.rows() != confusion.cols())
    throw config_error("metrics_from_confusion: matrix must be square");
  if (confusion.rows() < 2)
    throw config_error("metrics_from_confusion: need at least two classes");
  double total = 0.0;
  for (std::size_t i = 0; i < confusion.rows(); ++i)
    for (std::size_t j = 0; j < confusion.cols(); ++j) {
      if (confusion(i, j) < 0.0)
        throw config_error("metrics_from_confusion: negative count at (" +
                           std::to_string(i) + "," + std::to_string(j) + ")");
      total += confusion(i, j);
    }
  if (total <= 0.0)
    throw config_error("metrics_from_confusion: empty confusion matrix");

  MetricsReport report;
  report.confusion = confusion;
  fill_from_confusion(report);
  return report;
}

std::string metrics_json_string(const MetricsReport& report) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;

  nlohmann::json conf = nlohmann::json::array();
  for (std::size_t i = 0; i < report.confusion.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < report.confusion.cols(); ++k)
      row.push_back(report.confusion(i, k));
    conf.push_back(std::move(row));
  }
  j["confusion"] = std::move(conf);

  nlohmann::json classes = nlohmann::json::array();
  for (const ClassMetrics& m : report.per_class)
    classes.push_back({{"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"degenerate", m.degenerate}});
  j["per_class"] = std::move(classes);

  if (!report.roc.empty()) {
    nlohmann::json roc = nlohmann::json::array();
    for (const RocCurve& c : report.roc)
      roc.push_back({{"class", c.positive_class},
                     {"auroc", c.auroc},
                     {"degenerate", c.degenerate}});
    j["roc"] = std::move(roc);
  }

  if (report.has_latency)
    j["timing"] = {{"latency_mean_ms", report.latency_mean_ms},
                   {"latency_sd_ms", report.latency_sd_ms}};

  return j.dump(2) + "\n";
}

void write_metrics_json(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot open for writing: " + path);
  out << metrics_json_string(report);
  if (!out) throw format_error("write failed: " + path);
}

void write_roc_csv(const std::string& path,
                   const std::vector<RocCurve>& curves) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot open for writing: " + path);
  out << "class,fpr,tpr,threshold\n";
  char buf[64];
  for (const RocCurve& c : curves) {
    for (const RocPoint& p : c.points) {
      out << c.positive_class << ',';
      std::snprintf(buf, sizeof buf, "%.17g", p.fpr);
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", p.tpr);
      out << buf << ',';
      if (std::isinf(p.threshold)) {
        out << (p.threshold > 0 ? "inf" : "-inf");
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", p.threshold);
        out << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw format_error("write failed: " + path);
}

void write_predictions_json(const std::string& path,
                            const PredictionSet& preds) {
  if (preds.y_true.size() != preds.y_pred.size())
    throw config_error("predictions: y_true and y_pred lengths differ");
  if (!preds.scores.empty() && preds.scores.size() != preds.y_true.size())
    throw config_error("predictions: scores row count mismatch");
  nlohmann::json j;
  j["y_true"] = preds.y_true;
  j["y_pred"] = preds.y_pred;
  if (!preds.scores.empty()) j["scores"] = preds.scores;
  std::ofstream out(path);
  if (!out) throw format_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw format_error("write failed: " + path);
}

PredictionSet read_predictions_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": " + e.what());
  }
  if (!j.contains("y_true") || !j.contains("y_pred"))
    throw format_error(path + ": missing y_true or y_pred");
  PredictionSet p;
  try {
    p.y_true = j["y_true"].get<std::vector<std::size_t>>();
    p.y_pred = j["y_pred"].get<std::vector<std::size_t>>();
    if (j.contains("scores"))
      p.scores = j["scores"].get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": " + e.what());
  }
  if (p.y_true.size() != p.y_pred.size())
    throw format_error(path + ": y_true and y_pred lengths differ");
  if (!p.scores.empty() && p.scores.size() != p.y_true.size())
    throw format_error(path + ": scores row count mismatch");
  return p;
}

}  // namespace voxstate
