#pragma once

// Vector primitives behind every dense and sparse product in the library.
//
// Each primitive has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The active backend is chosen once from CPUID and can be
// pinned with set_backend() or the NSP_SIMD environment variable
// ("scalar" | "avx2"). Results across backends agree to rounding, not bitwise.

#include <cstddef>
#include <span>
#include <string_view>

namespace nsp::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b) noexcept;

// True when the running CPU (and build) can execute the backend.
bool backend_available(Backend b) noexcept;

Backend active_backend() noexcept;

// Falls back to Scalar when the requested backend is unavailable; returns the
// backend actually selected.
Backend set_backend(Backend b) noexcept;

double dot(std::span<const double> a, std::span<const double> b) noexcept;

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

// Sum of squares.
inline double squared_norm(std::span<const double> a) noexcept { return dot(a, a); }

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2

}  // namespace nsp::kernels
