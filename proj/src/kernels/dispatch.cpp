#include <atomic>
#include <cstdlib>
#include <string>

#include "nsp/kernels.hpp"

namespace nsp::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(NSP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() noexcept {
  if (const char* env = std::getenv("NSP_SIMD")) {
    if (std::string(env) == "scalar") return Backend::Scalar;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() noexcept {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend b) noexcept {
  return b == Backend::Scalar || cpu_has_avx2();
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

Backend set_backend(Backend b) noexcept {
  if (!backend_available(b)) b = Backend::Scalar;
  current().store(b, std::memory_order_relaxed);
  return b;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
#if defined(NSP_HAVE_AVX2)
  if (active_backend() == Backend::Avx2) return avx2::dot(a.data(), b.data(), n);
#endif
  return scalar::dot(a.data(), b.data(), n);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  const std::size_t n = x.size() < y.size() ? x.size() : y.size();
#if defined(NSP_HAVE_AVX2)
  if (active_backend() == Backend::Avx2) {
    avx2::axpy(alpha, x.data(), y.data(), n);
    return;
  }
#endif
  scalar::axpy(alpha, x.data(), y.data(), n);
}

}  // namespace nsp::kernels
