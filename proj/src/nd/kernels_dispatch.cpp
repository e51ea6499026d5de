#include <atomic>
#include <cstdlib>
#include <string>

#include "meshssm/error.hpp"
#include "meshssm/nd/kernels.hpp"

namespace meshssm::nd::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(MESHSSM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("MESHSSM_SIMD")) {
    const std::string value(env);
    if (value == "scalar") return Backend::scalar;
    if (value == "avx2" && cpu_has_avx2()) return Backend::avx2;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

const KernelTable& table(Backend backend) {
  switch (backend) {
    case Backend::avx2:
#if defined(MESHSSM_HAVE_AVX2)
      if (cpu_has_avx2()) return detail::avx2_table;
#endif
      throw Error("kernel backend avx2 is not available on this build/CPU");
    case Backend::scalar:
      break;
  }
  return detail::scalar_table;
}

const KernelTable& active() { return table(current().load(std::memory_order_relaxed)); }

Backend active_backend() { return current().load(std::memory_order_relaxed); }

bool backend_available(Backend backend) {
  return backend == Backend::scalar || cpu_has_avx2();
}

void select_backend(Backend backend) {
  if (!backend_available(backend))
    throw Error("kernel backend " + std::string(backend_name(backend)) + " is not available");
  current().store(backend);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

ScopedBackend::ScopedBackend(Backend backend) : previous_(active_backend()) {
  select_backend(backend);
}

ScopedBackend::~ScopedBackend() { current().store(previous_); }

}  // namespace meshssm::nd::kernels
