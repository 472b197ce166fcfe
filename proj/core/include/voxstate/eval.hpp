#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "voxstate/anova.hpp"
#include "voxstate/metrics.hpp"
#include "voxstate/models.hpp"
#include "voxstate/volume.hpp"

namespace voxstate {

struct Dataset {
  std::vector<VolumeSeries> runs;
  BrainMask mask;
};

// One leave-one-subject-out fold over sample indices.
struct Fold {
  std::string held_out_subject;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Builds one fold per distinct subject (order of first appearance).
// `subject_of_sample` names the owning subject of every sample.
std::vector<Fold> loocv_folds(const std::vector<std::string>& subject_of_sample);

// Upsamples every minority class to the majority count by seeded draws
// with replacement. The result starts with all original indices in
// order; appended draws follow ascending class label. Classes in
// [0, max_label] must all be present.
std::vector<std::size_t> bootstrap_balance(
    const std::vector<std::size_t>& labels, Rng& rng);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Disjoint cover of 0..n-1: test takes round(0.2 n) samples, validation
// round(0.2 (n - test)) of the remainder, training the rest.
SplitIndices split_random(std::size_t n, Rng& rng);

struct TrainConfig {
  std::size_t max_epochs = 500;
  std::size_t batch_size = 32;
  double lr0 = 1e-3;
  double lr_decay = 0.2;
  std::size_t patience = 50;
  double weight_decay = 0.0;
  // Stop once the epoch's mean training loss drops to this value or
  // below; 0 disables the early stop.
  double early_stop_loss = 0.0;
};

struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<double> lr_after_epoch;
};

// Minibatch training with per-epoch reshuffles; the schedule steps on
// the epoch's mean training loss. Trailing batches of a single sample
// are skipped (batch statistics need two). Labels index classes.
TrainLog train_network(nn::Network& net, const nn::Tensor& x,
                       const std::vector<std::size_t>& labels,
                       const TrainConfig& cfg, Rng& rng);

struct EvalOutput {
  std::vector<std::size_t> predictions;
  std::vector<std::vector<double>> scores;
};

// Batched evaluation-mode inference; scores are softmax rows.
EvalOutput evaluate_network(nn::Network& net, const nn::Tensor& x,
                            std::size_t batch_size = 64);

struct PipelineAOptions {
  std::size_t n_voxels = 300;
  std::size_t q_passes = 3;
  std::size_t ref_subject = 0;  // index into each fold's training subjects
  // Ablation: skip the rotational alignment and feed per-subject
  // normalized data directly.
  bool identity_alignment = false;
  ModelAConfig model;
  std::size_t max_epochs = 500;
  std::size_t batch_size = 32;
  double early_stop_loss = 0.0;
  // When set, per-fold artifacts (selection, common space, weights,
  // metrics, ROC points) are written under this directory.
  std::string artifact_dir;
};

struct FoldResult {
  std::string held_out_subject;
  MetricsReport metrics;
  PredictionSet predictions;
  std::vector<double> epoch_loss;
  double train_seconds = 0.0;
};

struct PipelineAResult {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  Matrix pooled_confusion;
};

// Leave-one-subject-out evaluation of the alignment pipeline: per fold,
// the voxel screen and the common space are fit on training subjects
// only, the held-out subject is mapped by its own orthogonal solve, the
// training rows are bootstrap-balanced, and the temporal classifier is
// trained fresh from fold-derived streams.
PipelineAResult run_pipeline_a(const Dataset& data,
                               const PipelineAOptions& opt,
                               std::uint64_t seed);

struct PipelineBOptions {
  ModelBConfig model = ModelBConfig::tiny();
  std::size_t repeats = 3;
  std::size_t max_epochs = 500;
  std::size_t batch_size = 32;
  double early_stop_loss = 0.0;
  // Keep all samples of a run in the same split. Off by default: the
  // reference split shuffles samples individually.
  bool group_by_run = false;
  std::string artifact_dir;
};

struct RepeatResult {
  MetricsReport test_metrics;
  PredictionSet test_predictions;
  double val_accuracy = 0.0;
  std::vector<double> epoch_loss;
  double train_seconds = 0.0;
};

struct PipelineBResult {
  std::size_t n_samples = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::vector<RepeatResult> repeats;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
};

// Two-class volumetric pipeline: pools neutral and negative volumes
// from every run, splits once, then trains the volumetric model per
// repeat on an n-of-n bootstrap of the training set with reseeded
// weights, reporting test metrics per repeat.
PipelineBResult run_pipeline_b(const Dataset& data,
                               const PipelineBOptions& opt,
                               std::uint64_t seed);

}  // namespace voxstate
