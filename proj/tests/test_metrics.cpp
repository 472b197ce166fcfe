#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxstate/metrics.hpp"

using namespace voxstate;

namespace {

std::vector<std::vector<double>> binary_scores(const std::vector<double>& s) {
  std::vector<std::vector<double>> rows;
  for (double v : s) rows.push_back({1.0 - v, v});
  return rows;
}

}  // namespace

TEST_CASE("two-class confusion reproduces the published summary") {
  Matrix c(2, 2, {250.0, 53.0, 59.0, 248.0});
  MetricsReport r = metrics_from_confusion(c);
  REQUIRE(r.per_class.size() == 2);
  CHECK(r.per_class[0].precision ==
        doctest::Approx(0.8090614886731392).epsilon(1e-14));
  CHECK(r.per_class[1].precision ==
        doctest::Approx(0.8239202657807309).epsilon(1e-14));
  CHECK(r.per_class[0].recall ==
        doctest::Approx(0.8250825082508251).epsilon(1e-14));
  CHECK(r.per_class[1].recall ==
        doctest::Approx(0.8078175895765473).epsilon(1e-14));
  CHECK(r.per_class[0].f1 == doctest::Approx(0.8169934640522876).epsilon(1e-14));
  CHECK(r.per_class[1].f1 == doctest::Approx(0.8157894736842105).epsilon(1e-14));
  CHECK(r.accuracy == doctest::Approx(0.8163934426229508).epsilon(1e-14));
}

TEST_CASE("averaged three-class confusion yields fractional-count metrics") {
  Matrix c(3, 3, {182.7, 9.7, 7.5,     //
                  12.6, 164.8, 22.5,   //
                  9.7, 28.4, 161.9});
  MetricsReport r = metrics_from_confusion(c);
  const double prec[3] = {0.891219512195122, 0.8122227698373583,
                          0.8436685773840542};
  const double rec[3] = {0.9139569784892446, 0.8244122061030515, 0.8095};
  const double f1[3] = {0.9024450481600396, 0.8182720953326714,
                        0.8262311814238326};
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(r.per_class[k].precision == doctest::Approx(prec[k]).epsilon(1e-14));
    CHECK(r.per_class[k].recall == doctest::Approx(rec[k]).epsilon(1e-14));
    CHECK(r.per_class[k].f1 == doctest::Approx(f1[k]).epsilon(1e-14));
    CHECK_FALSE(r.per_class[k].degenerate);
  }
  CHECK(r.accuracy == doctest::Approx(0.8492830943647883).epsilon(1e-14));

  Matrix rect(2, 3);
  CHECK_THROWS_AS(metrics_from_confusion(rect), config_error);
  Matrix neg(2, 2, {1.0, -1.0, 0.0, 1.0});
  CHECK_THROWS_AS(metrics_from_confusion(neg), config_error);
}

TEST_CASE("sample-level metrics agree with the confusion-level path") {
  std::vector<std::size_t> y_true = {0, 0, 1, 1, 2, 2, 2, 0};
  std::vector<std::size_t> y_pred = {0, 1, 1, 1, 2, 0, 2, 0};
  MetricsReport direct = compute_metrics(y_true, y_pred, 3);

  Matrix c(3, 3);
  for (std::size_t i = 0; i < y_true.size(); ++i)
    c(y_true[i], y_pred[i]) += 1.0;
  MetricsReport via = metrics_from_confusion(c);

  CHECK(direct.accuracy == via.accuracy);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(direct.per_class[k].precision == via.per_class[k].precision);
    CHECK(direct.per_class[k].recall == via.per_class[k].recall);
    CHECK(direct.per_class[k].f1 == via.per_class[k].f1);
  }
  CHECK(direct.accuracy == doctest::Approx(6.0 / 8.0));
  CHECK(direct.roc.empty());
  CHECK_FALSE(direct.has_latency);
}

TEST_CASE("auroc matches the external reference, ties included") {
  std::vector<std::size_t> y = {0, 0, 1, 1, 0, 1, 1, 0};
  std::vector<std::size_t> yp = {0, 0, 1, 1, 0, 1, 1, 0};

  MetricsReport plain = compute_metrics(
      y, yp, 2, binary_scores({.1, .4, .35, .8, .45, .7, .3, .2}));
  REQUIRE(plain.roc.size() == 2);
  CHECK(plain.roc[1].auroc == doctest::Approx(0.75).epsilon(1e-14));
  CHECK_FALSE(plain.roc[1].degenerate);

  MetricsReport tied = compute_metrics(
      y, yp, 2, binary_scores({.5, .5, .5, .8, .2, .5, .7, .1}));
  CHECK(tied.roc[1].auroc == doctest::Approx(0.875).epsilon(1e-14));

  // Complementing the score column flips the positives and the ranking
  // together, so the one-vs-rest area is the same for both classes.
  CHECK(plain.roc[0].auroc == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("auroc is invariant under monotone score transforms") {
  std::vector<std::size_t> y = {0, 0, 1, 1, 0, 1, 1, 0};
  std::vector<double> s = {.1, .4, .35, .8, .45, .7, .3, .2};
  std::vector<double> cubed;
  for (double v : s) cubed.push_back(v * v * v);
  MetricsReport a = compute_metrics(y, y, 2, binary_scores(s));
  MetricsReport b = compute_metrics(y, y, 2, binary_scores(cubed));
  CHECK(a.roc[1].auroc == doctest::Approx(b.roc[1].auroc).epsilon(1e-14));
}

TEST_CASE("degenerate classes are flagged instead of dividing by zero") {
  // Class 2 never appears in truth; class 1 is never predicted.
  std::vector<std::size_t> y_true = {0, 0, 1, 1};
  std::vector<std::size_t> y_pred = {0, 0, 0, 2};
  MetricsReport r = compute_metrics(y_true, y_pred, 3);
  CHECK(r.per_class[1].degenerate);  // predicted never: precision undefined
  CHECK(r.per_class[1].precision == 0.0);
  CHECK(r.per_class[2].degenerate);  // true never: recall undefined
  CHECK(r.per_class[2].recall == 0.0);

  MetricsReport with_scores = compute_metrics(
      y_true, y_pred, 3,
      {{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.5, 0.5, 0.0}, {0.2, 0.3, 0.5}});
  CHECK(with_scores.roc[2].degenerate);  // no true positives exist
  CHECK(with_scores.roc[2].auroc == 0.0);
}

TEST_CASE("input validation rejects malformed calls") {
  std::vector<std::size_t> y = {0, 1};
  CHECK_THROWS_AS(compute_metrics(y, {0}, 2), config_error);
  CHECK_THROWS_AS(compute_metrics(y, {0, 2}, 2), config_error);
  CHECK_THROWS_AS(compute_metrics({}, {}, 2), config_error);
  CHECK_THROWS_AS(compute_metrics(y, y, 1), config_error);
  CHECK_THROWS_AS(compute_metrics(y, y, 2, {{0.5, 0.4}, {0.5, 0.5}}),
                  config_error);
  CHECK_THROWS_AS(compute_metrics(y, y, 2, {{0.5, 0.5}}), config_error);
}

TEST_CASE("latency statistics use the sample standard deviation") {
  std::vector<std::size_t> y = {0, 1, 0};
  MetricsReport r = compute_metrics(y, y, 2, {}, {1.0, 2.0, 3.0});
  CHECK(r.has_latency);
  CHECK(r.latency_mean_ms == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.latency_sd_ms == doctest::Approx(1.0).epsilon(1e-14));

  MetricsReport single = compute_metrics(y, y, 2, {}, {5.0});
  CHECK(single.latency_mean_ms == doctest::Approx(5.0));
  CHECK(single.latency_sd_ms == 0.0);
}

TEST_CASE("json report isolates wall time under the timing key") {
  std::vector<std::size_t> y = {0, 1, 0, 1};
  MetricsReport fast = compute_metrics(y, y, 2, {}, {1.0, 1.0, 1.0, 1.0});
  MetricsReport slow = compute_metrics(y, y, 2, {}, {9.0, 7.0, 8.0, 6.0});

  nlohmann::json jf = nlohmann::json::parse(metrics_json_string(fast));
  nlohmann::json js = nlohmann::json::parse(metrics_json_string(slow));
  CHECK(jf.contains("timing"));
  CHECK(jf["timing"]["latency_mean_ms"].get<double>() == 1.0);
  CHECK(jf != js);
  jf.erase("timing");
  js.erase("timing");
  CHECK(jf == js);

  // Without latencies there is no timing key at all.
  MetricsReport bare = compute_metrics(y, y, 2);
  nlohmann::json jb = nlohmann::json::parse(metrics_json_string(bare));
  CHECK_FALSE(jb.contains("timing"));
  CHECK(jb["accuracy"].get<double>() == 1.0);
}

TEST_CASE("roc csv renders infinite thresholds readably") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "roc.csv").string();
  std::vector<std::size_t> y = {0, 1, 0, 1};
  MetricsReport r =
      compute_metrics(y, y, 2, binary_scores({0.1, 0.9, 0.2, 0.8}));
  write_roc_csv(path, r.roc);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("class,fpr,tpr,threshold") != std::string::npos);
  CHECK(text.find("inf") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("prediction sets round-trip through JSON") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "preds.json").string();
  PredictionSet p;
  p.y_true = {0, 1, 2};
  p.y_pred = {0, 2, 2};
  p.scores = {{0.7, 0.2, 0.1}, {0.1, 0.3, 0.6}, {0.25, 0.25, 0.5}};
  write_predictions_json(path, p);
  PredictionSet back = read_predictions_json(path);
  CHECK(back.y_true == p.y_true);
  CHECK(back.y_pred == p.y_pred);
  CHECK(back.scores == p.scores);

  PredictionSet no_scores;
  no_scores.y_true = {0, 1};
  no_scores.y_pred = {1, 1};
  write_predictions_json(path, no_scores);
  PredictionSet back2 = read_predictions_json(path);
  CHECK(back2.y_true == no_scores.y_true);
  CHECK(back2.scores.empty());
  std::remove(path.c_str());
}

TEST_CASE("prediction reader rejects malformed files") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "preds_bad.json").string();
  {
    std::ofstream out(path);
    out << "{\"y_true\": [0, 1]}\n";
  }
  CHECK_THROWS_AS(read_predictions_json(path), format_error);
  {
    std::ofstream out(path);
    out << "{\"y_true\": [0, 1], \"y_pred\": [0]}\n";
  }
  CHECK_THROWS_AS(read_predictions_json(path), format_error);
  {
    std::ofstream out(path);
    out << "not json\n";
  }
  CHECK_THROWS_AS(read_predictions_json(path), format_error);

  PredictionSet bad;
  bad.y_true = {0};
  bad.y_pred = {0, 1};
  CHECK_THROWS_AS(write_predictions_json(path, bad), config_error);
  std::remove(path.c_str());
}
