#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxstate/matrix.hpp"
#include "voxstate/volume.hpp"

namespace voxstate {

/**
 * Synthetic dataset geometry and signal model.
 *
 * Each condition owns one latent mean pattern in an n_voxels_latent-dim
 * common space; each subject receives a random orthogonal mixing of that
 * space into a shared set of informative in-mask voxels; i.i.d. Gaussian
 * noise of sd noise_sigma covers every in-mask voxel. Out-of-mask voxels
 * are zero.
 */
struct SynthSpec {
  std::size_t n_subjects = 11;
  std::size_t runs_per_subject = 2;
  std::size_t timepoints_per_run = 200;
  std::size_t n_voxels_latent = 120;
  VolumeDims dims{16, 16, 11};
  double class_signal_amplitude = 1.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  // One mixing matrix for every subject instead of per-subject draws.
  // Volumetric classification without alignment needs class patterns
  // that agree across subjects; the alignment pipeline does not.
  bool shared_mixing = false;
  // Subject j gets (j mod runs_per_subject) + 1 runs instead of a
  // uniform count, for datasets with uneven run coverage.
  bool mixed_runs = false;

  void validate() const;
};

// Everything needed to evaluate generated data against the true signal.
struct GroundTruth {
  BrainMask mask;
  // One row per condition, n_voxels_latent columns, amplitude included.
  Matrix class_means;
  std::vector<std::string> subject_ids;
  // Orthogonal mixing per subject (index-aligned with subject_ids).
  std::vector<Matrix> mixing;
  // Ascending positions of the informative voxels within the kept
  // (masked-column) space.
  std::vector<std::size_t> informative_columns;
  double class_signal_amplitude = 0.0;
  double noise_sigma = 0.0;
};

struct SynthResult {
  std::vector<VolumeSeries> runs;
  GroundTruth truth;
};

// Deterministic for a fixed spec (the seed lives in the spec). Labels
// follow a block design of 10-volume blocks cycling rest, neutral,
// rest, negative, giving the 2:1:1 class ratio.
SynthResult synth_generate(const SynthSpec& spec);

std::vector<int> block_design_labels(std::size_t n_timepoints);

// Nearest-latent-mean classification in the true common space: unmix
// each sample with the subject's ground-truth mixing and pick the
// closest class mean. `classes` empty means score every sample;
// otherwise only samples whose label is listed are scored.
double bayes_accuracy(const std::vector<VolumeSeries>& runs,
                      const GroundTruth& truth,
                      const std::vector<int>& classes = {});

void write_ground_truth(const std::string& path, const GroundTruth& truth);
GroundTruth read_ground_truth(const std::string& path);

}  // namespace voxstate
