// Compiled with -mavx2 -mfma; only reached through the dispatch table after a
// runtime CPU check.
#include <immintrin.h>

#include <vector>

#include "meshssm/nd/kernels.hpp"

namespace meshssm::nd::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// One row of c += a_row · b over columns [j0, m).
inline void gemm_row_tail(const double* arow, const double* b, double* crow, std::size_t k,
                          std::size_t m, std::size_t j0) {
  std::size_t j = j0;
  for (; j + 4 <= m; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p)
      acc = _mm256_fmadd_pd(_mm256_set1_pd(arow[p]), _mm256_loadu_pd(b + p * m + j), acc);
    _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), acc));
  }
  for (; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * m + j];
    crow[j] += acc;
  }
}

void gemm_nn_avx2(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                  std::size_t m) {
  const std::size_t m8 = m - m % 8;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* a0 = a + (i + 0) * k;
    const double* a1 = a + (i + 1) * k;
    const double* a2 = a + (i + 2) * k;
    const double* a3 = a + (i + 3) * k;
    for (std::size_t j = 0; j < m8; j += 8) {
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
      __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
      __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * m + j);
        const __m256d b1 = _mm256_loadu_pd(b + p * m + j + 4);
        __m256d av = _mm256_set1_pd(a0[p]);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_set1_pd(a1[p]);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_set1_pd(a2[p]);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_set1_pd(a3[p]);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
      }
      double* r0 = c + (i + 0) * m + j;
      double* r1 = c + (i + 1) * m + j;
      double* r2 = c + (i + 2) * m + j;
      double* r3 = c + (i + 3) * m + j;
      _mm256_storeu_pd(r0, _mm256_add_pd(_mm256_loadu_pd(r0), c00));
      _mm256_storeu_pd(r0 + 4, _mm256_add_pd(_mm256_loadu_pd(r0 + 4), c01));
      _mm256_storeu_pd(r1, _mm256_add_pd(_mm256_loadu_pd(r1), c10));
      _mm256_storeu_pd(r1 + 4, _mm256_add_pd(_mm256_loadu_pd(r1 + 4), c11));
      _mm256_storeu_pd(r2, _mm256_add_pd(_mm256_loadu_pd(r2), c20));
      _mm256_storeu_pd(r2 + 4, _mm256_add_pd(_mm256_loadu_pd(r2 + 4), c21));
      _mm256_storeu_pd(r3, _mm256_add_pd(_mm256_loadu_pd(r3), c30));
      _mm256_storeu_pd(r3 + 4, _mm256_add_pd(_mm256_loadu_pd(r3 + 4), c31));
    }
    if (m8 < m) {
      gemm_row_tail(a0, b, c + (i + 0) * m, k, m, m8);
      gemm_row_tail(a1, b, c + (i + 1) * m, k, m, m8);
      gemm_row_tail(a2, b, c + (i + 2) * m, k, m, m8);
      gemm_row_tail(a3, b, c + (i + 3) * m, k, m, m8);
    }
  }
  for (; i < n; ++i) gemm_row_tail(a + i * k, b, c + i * m, k, m, 0);
}

void gemm_nt_avx2(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                  std::size_t m) {
  // Transpose b into a k×m panel and reuse the nn microkernel.
  std::vector<double> bt(k * m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * m + j] = b[j * k + p];
  gemm_nn_avx2(a, bt.data(), c, n, k, m);
}

void gemm_tn_avx2(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                  std::size_t m) {
  const std::size_t m4 = m - m % 4;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* b0 = b + (i + 0) * m;
    const double* b1 = b + (i + 1) * m;
    const double* b2 = b + (i + 2) * m;
    const double* b3 = b + (i + 3) * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s0 = a[(i + 0) * k + p];
      const double s1 = a[(i + 1) * k + p];
      const double s2 = a[(i + 2) * k + p];
      const double s3 = a[(i + 3) * k + p];
      const __m256d v0 = _mm256_set1_pd(s0), v1 = _mm256_set1_pd(s1);
      const __m256d v2 = _mm256_set1_pd(s2), v3 = _mm256_set1_pd(s3);
      double* crow = c + p * m;
      std::size_t j = 0;
      for (; j < m4; j += 4) {
        __m256d acc = _mm256_loadu_pd(crow + j);
        acc = _mm256_fmadd_pd(v0, _mm256_loadu_pd(b0 + j), acc);
        acc = _mm256_fmadd_pd(v1, _mm256_loadu_pd(b1 + j), acc);
        acc = _mm256_fmadd_pd(v2, _mm256_loadu_pd(b2 + j), acc);
        acc = _mm256_fmadd_pd(v3, _mm256_loadu_pd(b3 + j), acc);
        _mm256_storeu_pd(crow + j, acc);
      }
      for (; j < m; ++j) crow[j] += s0 * b0[j] + s1 * b1[j] + s2 * b2[j] + s3 * b3[j];
    }
  }
  for (; i < n; ++i) {
    const double* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = a[i * k + p];
      const __m256d v = _mm256_set1_pd(s);
      double* crow = c + p * m;
      std::size_t j = 0;
      for (; j < m4; j += 4)
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(v, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
      for (; j < m; ++j) crow[j] += s * brow[j];
    }
  }
}

void sqdist3(const double* a, std::size_t n, const double* b, std::size_t m, double* out) {
  // Structure-of-arrays copy of b so four targets are handled per lane group.
  const std::size_t m4 = m - m % 4;
  std::vector<double> bx(m), by(m), bz(m);
  for (std::size_t j = 0; j < m; ++j) {
    bx[j] = b[3 * j];
    by[j] = b[3 * j + 1];
    bz[j] = b[3 * j + 2];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const __m256d ax = _mm256_set1_pd(a[3 * i]);
    const __m256d ay = _mm256_set1_pd(a[3 * i + 1]);
    const __m256d az = _mm256_set1_pd(a[3 * i + 2]);
    double* orow = out + i * m;
    std::size_t j = 0;
    for (; j < m4; j += 4) {
      const __m256d dx = _mm256_sub_pd(ax, _mm256_loadu_pd(bx.data() + j));
      const __m256d dy = _mm256_sub_pd(ay, _mm256_loadu_pd(by.data() + j));
      const __m256d dz = _mm256_sub_pd(az, _mm256_loadu_pd(bz.data() + j));
      const __m256d s =
          _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                        _mm256_mul_pd(dz, dz));
      _mm256_storeu_pd(orow + j, s);
    }
    for (; j < m; ++j) {
      const double dx = a[3 * i] - bx[j];
      const double dy = a[3 * i + 1] - by[j];
      const double dz = a[3 * i + 2] - bz[j];
      double acc = dx * dx;
      acc += dy * dy;
      acc += dz * dz;
      orow[j] = acc;
    }
  }
}

void pairwise_sqdist_avx2(const double* a, std::size_t n, const double* b, std::size_t m,
                          std::size_t d, double* out) {
  if (d == 3) {
    sqdist3(a, n, b, m, out);
    return;
  }
  const std::size_t d4 = d - d % 4;
  auto tail = [&](const double* ai, const double* bj, double s) {
    for (std::size_t q = d4; q < d; ++q) {
      const double diff = ai[q] - bj[q];
      s += diff * diff;
    }
    return s;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * d;
    double* orow = out + i * m;
    std::size_t j = 0;
    // Four b rows at a time; the four accumulators are reduced together.
    for (; j + 4 <= m; j += 4) {
      const double* b0 = b + j * d;
      const double* b1 = b0 + d;
      const double* b2 = b1 + d;
      const double* b3 = b2 + d;
      __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
      __m256d acc2 = _mm256_setzero_pd(), acc3 = _mm256_setzero_pd();
      for (std::size_t q = 0; q < d4; q += 4) {
        const __m256d va = _mm256_loadu_pd(ai + q);
        const __m256d d0 = _mm256_sub_pd(va, _mm256_loadu_pd(b0 + q));
        const __m256d d1 = _mm256_sub_pd(va, _mm256_loadu_pd(b1 + q));
        const __m256d d2 = _mm256_sub_pd(va, _mm256_loadu_pd(b2 + q));
        const __m256d d3 = _mm256_sub_pd(va, _mm256_loadu_pd(b3 + q));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
        acc2 = _mm256_fmadd_pd(d2, d2, acc2);
        acc3 = _mm256_fmadd_pd(d3, d3, acc3);
      }
      // {a0+a1, b0+b1, a2+a3, b2+b3} style pairwise folds into one vector of four sums.
      const __m256d h01 = _mm256_hadd_pd(acc0, acc1);
      const __m256d h23 = _mm256_hadd_pd(acc2, acc3);
      const __m256d lo = _mm256_permute2f128_pd(h01, h23, 0x20);
      const __m256d hi = _mm256_permute2f128_pd(h01, h23, 0x31);
      alignas(32) double sums[4];
      _mm256_store_pd(sums, _mm256_add_pd(lo, hi));
      orow[j] = tail(ai, b0, sums[0]);
      orow[j + 1] = tail(ai, b1, sums[1]);
      orow[j + 2] = tail(ai, b2, sums[2]);
      orow[j + 3] = tail(ai, b3, sums[3]);
    }
    for (; j < m; ++j) {
      const double* bj = b + j * d;
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t q = 0; q < d4; q += 4) {
        const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(ai + q), _mm256_loadu_pd(bj + q));
        acc = _mm256_fmadd_pd(diff, diff, acc);
      }
      orow[j] = tail(ai, bj, hsum(acc));
    }
  }
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

namespace detail {
const KernelTable avx2_table{
    gemm_nn_avx2, gemm_nt_avx2, gemm_tn_avx2, pairwise_sqdist_avx2, dot_avx2, axpy_avx2,
};
}  // namespace detail

}  // namespace meshssm::nd::kernels
