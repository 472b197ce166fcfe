#include "voxstate/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace voxstate {
namespace {

#if defined(__GNUC__) || defined(__clang__)
typedef double v8df __attribute__((vector_size(64), aligned(8)));
#define VOXSTATE_VECTOR_KERNEL 1
#endif

// Register tile of the inner kernel: MR rows of C by NR columns.
constexpr std::size_t MR = 6;
constexpr std::size_t NR = 16;
// Cache blocking. KC * NR doubles of packed B stay hot in L1 per strip,
// MC * KC of packed A in L2.
constexpr std::size_t KC = 320;
constexpr std::size_t MC = 72;
constexpr std::size_t NC = 2048;

#ifdef VOXSTATE_VECTOR_KERNEL
// Computes a full MR x NR tile: acc = sum_k a_strip[k] * b_strip[k].
// a_strip holds MR values per k, b_strip NR values per k.
void micro_kernel(std::size_t kc, const double* __restrict ap,
                  const double* __restrict bp, double* __restrict c,
                  std::size_t ldc, double beta) {
  v8df acc[MR][2];
  for (std::size_t i = 0; i < MR; ++i) {
    acc[i][0] = v8df{};
    acc[i][1] = v8df{};
  }
  for (std::size_t k = 0; k < kc; ++k) {
    v8df b0, b1;
    std::memcpy(&b0, bp + k * NR, sizeof b0);
    std::memcpy(&b1, bp + k * NR + 8, sizeof b1);
    const double* a = ap + k * MR;
    for (std::size_t i = 0; i < MR; ++i) {
      v8df ai = v8df{} + a[i];
      acc[i][0] += ai * b0;
      acc[i][1] += ai * b1;
    }
  }
  for (std::size_t i = 0; i < MR; ++i) {
    double tmp[NR];
    std::memcpy(tmp, &acc[i][0], 64);
    std::memcpy(tmp + 8, &acc[i][1], 64);
    double* crow = c + i * ldc;
    if (beta == 0.0) {
      for (std::size_t j = 0; j < NR; ++j) crow[j] = tmp[j];
    } else {
      for (std::size_t j = 0; j < NR; ++j) crow[j] = beta * crow[j] + tmp[j];
    }
  }
}
#else
void micro_kernel(std::size_t kc, const double* __restrict ap,
                  const double* __restrict bp, double* __restrict c,
                  std::size_t ldc, double beta) {
  double acc[MR][NR] = {};
  for (std::size_t k = 0; k < kc; ++k) {
    const double* a = ap + k * MR;
    const double* b = bp + k * NR;
    for (std::size_t i = 0; i < MR; ++i)
      for (std::size_t j = 0; j < NR; ++j) acc[i][j] += a[i] * b[j];
  }
  for (std::size_t i = 0; i < MR; ++i) {
    double* crow = c + i * ldc;
    if (beta == 0.0) {
      for (std::size_t j = 0; j < NR; ++j) crow[j] = acc[i][j];
    } else {
      for (std::size_t j = 0; j < NR; ++j) crow[j] = beta * crow[j] + acc[i][j];
    }
  }
}
#endif

// Element of op(A) at row r, column c for the packing routines.
inline double read_op(const double* a, std::size_t ld, bool trans,
                      std::size_t r, std::size_t c) {
  return trans ? a[c * ld + r] : a[r * ld + c];
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, double alpha, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0 || alpha == 0.0) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * ldc;
      if (beta == 0.0)
        std::fill(crow, crow + n, 0.0);
      else if (beta != 1.0)
        for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    return;
  }

  // Small products skip the packing machinery; its setup costs more
  // than the arithmetic below this size.
  if (static_cast<unsigned long long>(m) * n * k <= 32768ULL) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk)
          acc += read_op(a, lda, trans_a, i, kk) *
                 read_op(b, ldb, trans_b, kk, j);
        crow[j] = beta == 0.0 ? alpha * acc : alpha * acc + beta * crow[j];
      }
    }
    return;
  }

  const std::size_t kc_cap = std::min(KC, k);
  const std::size_t mc_cap = std::min(MC, (m + MR - 1) / MR * MR);
  const std::size_t nc_cap = std::min(NC, (n + NR - 1) / NR * NR);
  thread_local std::vector<double> apack, bpack;
  if (apack.size() < mc_cap * kc_cap) apack.resize(mc_cap * kc_cap);
  if (bpack.size() < kc_cap * nc_cap) bpack.resize(kc_cap * nc_cap);

  for (std::size_t jc = 0; jc < n; jc += NC) {
    const std::size_t nc = std::min(NC, n - jc);
    for (std::size_t pc = 0; pc < k; pc += KC) {
      const std::size_t kc = std::min(KC, k - pc);
      // First k-panel applies the caller's beta, later panels accumulate.
      const double beta_panel = (pc == 0) ? beta : 1.0;

      // Pack op(B)[pc:pc+kc, jc:jc+nc] into NR-wide strips, scaled by
      // alpha so the kernel itself never multiplies by it.
      for (std::size_t j = 0; j < nc; j += NR) {
        const std::size_t nr = std::min(NR, nc - j);
        double* dst = bpack.data() + j * kc;
        for (std::size_t kk = 0; kk < kc; ++kk) {
          for (std::size_t jj = 0; jj < NR; ++jj) {
            dst[kk * NR + jj] =
                (jj < nr)
                    ? alpha * read_op(b, ldb, trans_b, pc + kk, jc + j + jj)
                    : 0.0;
          }
        }
      }

      for (std::size_t ic = 0; ic < m; ic += MC) {
        const std::size_t mc = std::min(MC, m - ic);
        // Pack op(A)[ic:ic+mc, pc:pc+kc] into MR-tall strips.
        for (std::size_t i = 0; i < mc; i += MR) {
          const std::size_t mr = std::min(MR, mc - i);
          double* dst = apack.data() + i * kc;
          for (std::size_t kk = 0; kk < kc; ++kk) {
            for (std::size_t ii = 0; ii < MR; ++ii) {
              dst[kk * MR + ii] =
                  (ii < mr) ? read_op(a, lda, trans_a, ic + i + ii, pc + kk)
                            : 0.0;
            }
          }
        }

        for (std::size_t j = 0; j < nc; j += NR) {
          const std::size_t nr = std::min(NR, nc - j);
          for (std::size_t i = 0; i < mc; i += MR) {
            const std::size_t mr = std::min(MR, mc - i);
            if (mr == MR && nr == NR) {
              micro_kernel(kc, apack.data() + i * kc, bpack.data() + j * kc,
                           c + (ic + i) * ldc + jc + j, ldc, beta_panel);
            } else {
              double tmp[MR * NR];
              micro_kernel(kc, apack.data() + i * kc, bpack.data() + j * kc,
                           tmp, NR, 0.0);
              for (std::size_t ii = 0; ii < mr; ++ii) {
                double* crow = c + (ic + i + ii) * ldc + jc + j;
                if (beta_panel == 0.0) {
                  for (std::size_t jj = 0; jj < nr; ++jj)
                    crow[jj] = tmp[ii * NR + jj];
                } else {
                  for (std::size_t jj = 0; jj < nr; ++jj)
                    crow[jj] = beta_panel * crow[jj] + tmp[ii * NR + jj];
                }
              }
            }
          }
        }
      }
    }
  }
}

namespace {

Matrix gemm_wrapper(bool trans_a, bool trans_b, const Matrix& a,
                    const Matrix& b, const char* who) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t ka = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (ka != kb)
    throw config_error(std::string(who) + ": inner dimensions disagree, " +
                       std::to_string(ka) + " vs " + std::to_string(kb));
  Matrix c(m, n);
  gemm(trans_a, trans_b, m, n, ka, 1.0, a.data(), a.cols(), b.data(), b.cols(),
       0.0, c.data(), n);
  return c;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  return gemm_wrapper(false, false, a, b, "matmul");
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  return gemm_wrapper(true, false, a, b, "matmul_at_b");
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  return gemm_wrapper(false, true, a, b, "matmul_a_bt");
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  // Blocked to keep both sides cache-friendly on large inputs.
  constexpr std::size_t B = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += B) {
    const std::size_t i1 = std::min(i0 + B, a.rows());
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += B) {
      const std::size_t j1 = std::min(j0 + B, a.cols());
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) t(j, i) = a(i, j);
    }
  }
  return t;
}

double frobenius_norm(const Matrix& a) {
  // Scaled sum of squares, so very large or very tiny entries do not
  // overflow or underflow the accumulator.
  double scale = 0.0;
  double ssq = 1.0;
  const double* p = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = std::fabs(p[i]);
    if (x == 0.0) continue;
    if (scale < x) {
      const double r = scale / x;
      ssq = 1.0 + ssq * r * r;
      scale = x;
    } else {
      const double r = x / scale;
      ssq += r * r;
    }
  }
  return scale * std::sqrt(ssq);
}

void frobenius_normalize(Matrix& a) {
  const double norm = frobenius_norm(a);
  if (norm == 0.0)
    throw numeric_error("frobenius_normalize: zero matrix has no scale");
  double* p = a.data();
  const double inv = 1.0 / norm;
  for (std::size_t i = 0; i < a.size(); ++i) p[i] *= inv;
}

void fill_normal(Matrix& a, Rng& rng, double stddev) {
  double* p = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = stddev * rng.normal();
}

}  // namespace voxstate
