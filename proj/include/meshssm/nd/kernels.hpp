#pragma once

// Dense inner-loop kernels. Every kernel has a scalar reference implementation
// and, where the CPU supports it, an AVX2+FMA variant. The active table is
// chosen once at startup (override with MESHSSM_SIMD=scalar|avx2) and can be
// switched explicitly for equivalence testing.

#include <cstddef>
#include <string_view>

namespace meshssm::nd::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
  // c[n×m] += a[n×k] · b[k×m]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                  std::size_t m);
  // c[n×m] += a[n×k] · b[m×k]ᵀ
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                  std::size_t m);
  // c[k×m] += a[n×k]ᵀ · b[n×m]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                  std::size_t m);
  // out[i*m + j] = |a_i - b_j|², rows of width d. For d == 3 the sum is
  // accumulated as (dx² + dy²) + dz² on every backend, so results are bit-identical.
  void (*pairwise_sqdist)(const double* a, std::size_t n, const double* b, std::size_t m,
                          std::size_t d, double* out);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += alpha · x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& table(Backend backend);
const KernelTable& active();

Backend active_backend();
bool backend_available(Backend backend);
// Throws meshssm::Error when the backend is not compiled in or the CPU lacks it.
void select_backend(Backend backend);

std::string_view backend_name(Backend backend);

// Selects a backend for the lifetime of the guard, restoring the previous one.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend);
  ~ScopedBackend();
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

namespace detail {
extern const KernelTable scalar_table;
#if defined(MESHSSM_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace meshssm::nd::kernels
