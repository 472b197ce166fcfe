#pragma once

#include <string>
#include <vector>

#include "voxstate/anova.hpp"
#include "voxstate/matrix.hpp"

namespace voxstate {

// One subject's time series over the selected voxels: rows = timepoints,
// columns = voxels. Frobenius-normalized before any alignment.
struct SubjectMatrix {
  std::string subject_id;
  Matrix x;
};

struct ProcrustesResult {
  Matrix rotation;
  // False when the cross-product X^T T is rank deficient; the returned
  // rotation is still a valid optimum, just not the only one.
  bool unique = true;
};

/**
 * Orthogonal Procrustes: the m x m orthogonal R minimizing ||X R - T||_F,
 * computed as R = U V^T from the SVD U S V^T of X^T T. Rotations act on
 * the voxel axis. The optimum is invariant to the overall scale of
 * either argument.
 */
ProcrustesResult procrustes_rotation(const Matrix& x, const Matrix& t);

// Output of one alignment stage. rotations[j] maps that stage's input
// matrix j onto aligned[j]; reference is the stage's final T.
struct AlignmentStep {
  std::vector<Matrix> rotations;
  std::vector<Matrix> aligned;
  Matrix reference;
};

/**
 * First-pass sequential alignment. The reference starts as the
 * ref_index subject; every other subject, in list order, is rotated onto
 * the running reference, which is then blended as
 *   T <- w * aligned + (1 - w) * T,  w = 1/(i+1)
 * for the i-th non-reference subject (1-based), making the final T the
 * unweighted mean of all aligned subjects. Order-dependent by design.
 */
AlignmentStep level1_align(const std::vector<SubjectMatrix>& subjects,
                           std::size_t ref_index = 0);

/**
 * Iterative refinement. Each of the q passes realigns every subject to
 * the leave-one-out mean of the pass-start reference,
 *   T_tmp = (p T - A_j) / (p - 1),
 * then recomputes T as the mean of the realigned subjects. Returned
 * rotations compose all passes (input aligned -> output aligned).
 */
AlignmentStep level2_refine(const std::vector<Matrix>& aligned,
                            const Matrix& reference, std::size_t q);

struct HyperalignOptions {
  std::size_t ref_index = 0;
  std::size_t q = 3;
};

// Frozen alignment result. rotations[j] is the direct Procrustes solve
// of training subject j against the final reference, so transforming a
// training subject reproduces its fitted alignment exactly.
struct CommonSpace {
  Matrix t;
  std::vector<std::string> subject_ids;
  std::vector<Matrix> rotations;
  FeatureSelection selection;
  std::vector<double> w_schedule;
  std::size_t q = 0;
};

// Normalizes each subject, runs level 1 then level 2, normalizes the
// final reference. The selection is carried along for checkpointing.
CommonSpace hyperalign_fit(const std::vector<SubjectMatrix>& subjects,
                           const HyperalignOptions& options = {},
                           const FeatureSelection& selection = {});

// One Procrustes solve of the (normalized) subject against the frozen
// reference; returns the aligned matrix X R. Never updates the space.
Matrix hyperalign_transform(const CommonSpace& space,
                            const SubjectMatrix& subject);

// Mean Pearson correlation over all matrix pairs, each matrix flattened.
double mean_pairwise_correlation(const std::vector<Matrix>& mats);

/**
 * Alignment checkpoint, little-endian:
 *   "HALN" u32 version=1  u32 n  u32 m  u32 p
 *   T as n*m float64, then p rotations as m*m float64 each,
 *   u32 byte length + FeatureSelection JSON (UTF-8).
 * Subject ids and fitting hyperparameters are not part of the format.
 */
void write_common_space(const std::string& path, const CommonSpace& space);
CommonSpace read_common_space(const std::string& path);

}  // namespace voxstate
