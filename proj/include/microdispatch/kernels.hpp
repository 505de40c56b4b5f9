#pragma once

#include <cstddef>

// =====================================================================
// Dense vector kernels used by the dispatch QP solver's inner loops.
//
// Every kernel exists in a scalar reference form and (on x86-64) an AVX2
// form; the active implementation is chosen once at startup by CPU
// detection and can be forced with MICRODISPATCH_SIMD=scalar|avx2 for
// the scalar-vs-SIMD equivalence tests.
// =====================================================================

namespace microdispatch::kernels {

enum class Isa { scalar, avx2 };

// Implementation currently routed to by the dispatch table.
Isa active_isa();

// Force a specific implementation (tests). Throws std::invalid_argument
// if the requested ISA is not available on this machine/build.
void force_isa(Isa isa);

// out[i] = a*x[i] + b*y[i]
void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n);

// y[i] += c * (u[i] - v[i])
void accum_scaled_diff(double c, const double* u, const double* v, double* y,
                       std::size_t n);

// out[i] = min(max(x[i] * scale[i], lo[i]), hi[i])
// (lo/hi may be +/-inf; NaN never enters: x, scale finite by construction)
void scaled_clamp(const double* x, const double* scale, const double* lo,
                  const double* hi, double* out, std::size_t n);

// sum x[i]*y[i]
double dot(const double* x, const double* y, std::size_t n);

// max |x[i] - y[i]|
double max_abs_diff(const double* x, const double* y, std::size_t n);

// max |x[i]|
double max_abs(const double* x, std::size_t n);

// ---------------------------------------------------------------------
// Reference implementations (always built; the dispatch table points at
// these when SIMD is unavailable or disabled). Exposed so equivalence
// tests can compare the active path against them directly.
// ---------------------------------------------------------------------
namespace scalar {
void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n);
void accum_scaled_diff(double c, const double* u, const double* v, double* y,
                       std::size_t n);
void scaled_clamp(const double* x, const double* scale, const double* lo,
                  const double* hi, double* out, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double max_abs_diff(const double* x, const double* y, std::size_t n);
double max_abs(const double* x, std::size_t n);
} // namespace scalar

#if defined(MICRODISPATCH_HAVE_AVX2)
namespace avx2 {
void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n);
void accum_scaled_diff(double c, const double* u, const double* v, double* y,
                       std::size_t n);
void scaled_clamp(const double* x, const double* scale, const double* lo,
                  const double* hi, double* out, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double max_abs_diff(const double* x, const double* y, std::size_t n);
double max_abs(const double* x, std::size_t n);
} // namespace avx2
#endif

} // namespace microdispatch::kernels
