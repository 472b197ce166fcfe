#include "voxstate/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxstate {
namespace {

constexpr double kOrthTol = 1e-12;
constexpr int kMaxSweeps = 100;

// Core one-sided Jacobi for m >= n. W starts as a copy of A and ends
// with mutually orthogonal columns; V accumulates the rotations.
void jacobi_columns(Matrix& w, Matrix& v) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  if (n < 2) return;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          const double wi = w(r, i);
          const double wj = w(r, j);
          alpha += wi * wi;
          beta += wj * wj;
          gamma += wi * wj;
        }
        if (gamma == 0.0) continue;
        if (std::fabs(gamma) <= kOrthTol * std::sqrt(alpha) * std::sqrt(beta))
          continue;

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        for (std::size_t r = 0; r < m; ++r) {
          const double wi = w(r, i);
          const double wj = w(r, j);
          w(r, i) = c * wi - s * wj;
          w(r, j) = s * wi + c * wj;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vi = v(r, i);
          const double vj = v(r, j);
          v(r, i) = c * vi - s * vj;
          v(r, j) = s * vi + c * vj;
        }
        rotated = true;
      }
    }
    if (!rotated) return;
  }
  throw numeric_error("svd: Jacobi sweep limit reached without convergence");
}

// Unit vector orthogonal to the first `have` columns of u, written into
// column `slot`. Scans the coordinate basis and keeps the candidate with
// the largest residual, which always has norm^2 >= (m - have) / m.
void complete_basis_column(Matrix& u, std::size_t have, std::size_t slot) {
  const std::size_t m = u.rows();
  std::vector<double> best;
  double best_norm = -1.0;
  std::vector<double> res(m);
  for (std::size_t k = 0; k < m; ++k) {
    std::fill(res.begin(), res.end(), 0.0);
    res[k] = 1.0;
    for (std::size_t c = 0; c < have; ++c) {
      double dot = u(k, c);
      for (std::size_t r = 0; r < m; ++r) res[r] -= dot * u(r, c);
    }
    double nrm = 0.0;
    for (double x : res) nrm += x * x;
    if (nrm > best_norm) {
      best_norm = nrm;
      best = res;
    }
  }
  // Re-orthogonalize once to clean up roundoff, then normalize.
  for (std::size_t c = 0; c < have; ++c) {
    double dot = 0.0;
    for (std::size_t r = 0; r < m; ++r) dot += best[r] * u(r, c);
    for (std::size_t r = 0; r < m; ++r) best[r] -= dot * u(r, c);
  }
  double nrm = 0.0;
  for (double x : best) nrm += x * x;
  nrm = std::sqrt(nrm);
  for (std::size_t r = 0; r < m; ++r) u(r, slot) = best[r] / nrm;
}

SvdResult svd_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();

  Matrix w = a;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  jacobi_columns(w, v);

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double ssq = 0.0;
    for (std::size_t r = 0; r < m; ++r) ssq += w(r, j) * w(r, j);
    sigma[j] = std::sqrt(ssq);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return sigma[x] > sigma[y];
  });

  SvdResult out;
  out.u = Matrix(m, n);
  out.v = Matrix(n, n);
  out.singular_values.resize(n);

  std::size_t nonzero = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.singular_values[j] = sigma[src];
    for (std::size_t r = 0; r < n; ++r) out.v(r, j) = v(r, src);
    if (sigma[src] > 0.0) {
      const double inv = 1.0 / sigma[src];
      for (std::size_t r = 0; r < m; ++r) out.u(r, j) = w(r, src) * inv;
      ++nonzero;
    }
  }
  // Exactly-zero singular values leave U columns undefined; fill them
  // with an orthonormal completion so U^T U = I regardless of rank.
  for (std::size_t j = nonzero; j < n; ++j) complete_basis_column(out.u, j, j);

  return out;
}

}  // namespace

SvdResult svd(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0)
    throw config_error("svd: matrix must be non-empty");
  if (a.rows() >= a.cols()) return svd_tall(a);
  SvdResult t = svd_tall(transpose(a));
  return SvdResult{std::move(t.v), std::move(t.singular_values),
                   std::move(t.u)};
}

Matrix random_orthogonal(std::size_t n, Rng& rng) {
  if (n == 0) throw config_error("random_orthogonal: size must be positive");
  Matrix g(n, n);
  fill_normal(g, rng);

  Matrix q(n, n);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < n; ++r) col[r] = g(r, j);
    // Two Gram-Schmidt passes keep orthogonality tight at any size.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        double dot = 0.0;
        for (std::size_t r = 0; r < n; ++r) dot += q(r, i) * col[r];
        for (std::size_t r = 0; r < n; ++r) col[r] -= dot * q(r, i);
      }
    }
    double nrm = 0.0;
    for (double x : col) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm < 1e-12)
      throw numeric_error("random_orthogonal: degenerate Gaussian draw");
    for (std::size_t r = 0; r < n; ++r) q(r, j) = col[r] / nrm;
  }
  return q;
}

}  // namespace voxstate
