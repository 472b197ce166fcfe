#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "voxstate/matrix.hpp"

namespace voxstate {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

// One-vs-rest ROC for a single positive class. A class with no positive
// or no negative examples has no curve; it is marked degenerate and
// carries an area of zero.
struct RocCurve {
  std::size_t positive_class = 0;
  std::vector<RocPoint> points;
  double auroc = 0.0;
  bool degenerate = false;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when a zero denominator forced any of the three values to 0.
  bool degenerate = false;
};

struct MetricsReport {
  Matrix confusion;  // rows are true classes, columns predicted
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  std::vector<RocCurve> roc;  // empty when no scores were supplied
  double latency_mean_ms = 0.0;
  double latency_sd_ms = 0.0;
  bool has_latency = false;
};

// Scores, when given, hold one probability row per sample (summing to 1
// within 1e-6) and feed the ROC curves. Latencies, when given, are
// per-sample wall times in milliseconds.
MetricsReport compute_metrics(
    const std::vector<std::size_t>& y_true,
    const std::vector<std::size_t>& y_pred, std::size_t n_classes,
    const std::vector<std::vector<double>>& scores = {},
    const std::vector<double>& latencies_ms = {});

// Derives accuracy and per-class metrics from a prebuilt confusion
// matrix, which may hold real-valued (e.g. averaged) counts.
MetricsReport metrics_from_confusion(const Matrix& confusion);

// JSON rendering of a report. Every wall-time quantity lives under the
// top-level "timing" key so byte comparisons can strip it.
std::string metrics_json_string(const MetricsReport& report);
void write_metrics_json(const std::string& path, const MetricsReport& report);

// CSV with one row per ROC point: class,fpr,tpr,threshold. Infinite
// thresholds render as "inf" and "-inf".
void write_roc_csv(const std::string& path,
                   const std::vector<RocCurve>& curves);

// Persisted per-sample predictions, enough to rebuild a MetricsReport
// later without rerunning inference. Scores may be empty.
struct PredictionSet {
  std::vector<std::size_t> y_true;
  std::vector<std::size_t> y_pred;
  std::vector<std::vector<double>> scores;
};

void write_predictions_json(const std::string& path,
                            const PredictionSet& preds);
PredictionSet read_predictions_json(const std::string& path);

}  // namespace voxstate
