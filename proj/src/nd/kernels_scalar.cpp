#include "meshssm/nd/kernels.hpp"

namespace meshssm::nd::kernels {
namespace {

void gemm_nn_ref(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                 std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt_ref(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                 std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * m + j] += acc;
    }
  }
}

void gemm_tn_ref(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                 std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      double* crow = c + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

void pairwise_sqdist_ref(const double* a, std::size_t n, const double* b, std::size_t m,
                         std::size_t d, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b + j * d;
      double acc = 0.0;
      for (std::size_t q = 0; q < d; ++q) {
        const double diff = ai[q] - bj[q];
        acc += diff * diff;
      }
      out[i * m + j] = acc;
    }
  }
}

double dot_ref(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_ref(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

namespace detail {
const KernelTable scalar_table{
    gemm_nn_ref, gemm_nt_ref, gemm_tn_ref, pairwise_sqdist_ref, dot_ref, axpy_ref,
};
}  // namespace detail

}  // namespace meshssm::nd::kernels
