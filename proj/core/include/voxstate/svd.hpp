#pragma once

#include <vector>

#include "voxstate/matrix.hpp"
#include "voxstate/rng.hpp"

namespace voxstate {

// Thin singular value decomposition A = U * diag(s) * V^T.
// For an m x n input with r = min(m, n): U is m x r, s has r entries
// sorted non-increasing and all >= 0, V is n x r. U and V have
// orthonormal columns even when A is rank deficient.
struct SvdResult {
  Matrix u;
  std::vector<double> singular_values;
  Matrix v;
};

/**
 * One-sided Jacobi SVD.
 *
 * Rotates column pairs until every pair is mutually orthogonal relative
 * to the column scales (|w_i . w_j| <= 1e-12 * |w_i| |w_j|). The sweep
 * order is a fixed cyclic order, so the result is deterministic.
 * Throws numeric_error if 100 full sweeps do not reach convergence.
 */
SvdResult svd(const Matrix& a);

// Haar-distributed random orthogonal matrix, deterministic for a given
// generator state: Gaussian fill followed by modified Gram-Schmidt with
// a second orthogonalization pass.
Matrix random_orthogonal(std::size_t n, Rng& rng);

}  // namespace voxstate
