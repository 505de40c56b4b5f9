#include "microdispatch/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace microdispatch::kernels {

// ---------------------------------------------------------------------
// scalar reference kernels
// ---------------------------------------------------------------------
namespace scalar {

void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void accum_scaled_diff(double c, const double* u, const double* v, double* y,
                       std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += c * (u[i] - v[i]);
}

void scaled_clamp(const double* x, const double* scale, const double* lo,
                  const double* hi, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double z = x[i] * scale[i];
        out[i] = std::min(std::max(z, lo[i]), hi[i]);
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double max_abs_diff(const double* x, const double* y, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i] - y[i]));
    return m;
}

double max_abs(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

} // namespace scalar

// ---------------------------------------------------------------------
// runtime dispatch table
// ---------------------------------------------------------------------
namespace {

struct Table {
    void (*axpby)(double, const double*, double, const double*, double*, std::size_t);
    void (*accum_scaled_diff)(double, const double*, const double*, double*, std::size_t);
    void (*scaled_clamp)(const double*, const double*, const double*, const double*,
                         double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    double (*max_abs_diff)(const double*, const double*, std::size_t);
    double (*max_abs)(const double*, std::size_t);
    Isa isa;
};

constexpr Table kScalarTable = {
    &scalar::axpby, &scalar::accum_scaled_diff, &scalar::scaled_clamp,
    &scalar::dot, &scalar::max_abs_diff, &scalar::max_abs, Isa::scalar};

#if defined(MICRODISPATCH_HAVE_AVX2)
constexpr Table kAvx2Table = {
    &avx2::axpby, &avx2::accum_scaled_diff, &avx2::scaled_clamp,
    &avx2::dot, &avx2::max_abs_diff, &avx2::max_abs, Isa::avx2};
#endif

bool avx2_available() {
#if defined(MICRODISPATCH_HAVE_AVX2)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

const Table& pick_initial_table() {
    static const Table* chosen = [] {
        const char* env = std::getenv("MICRODISPATCH_SIMD");
        if (env != nullptr && std::strcmp(env, "scalar") == 0) return &kScalarTable;
#if defined(MICRODISPATCH_HAVE_AVX2)
        if (env != nullptr && std::strcmp(env, "avx2") == 0 && avx2_available())
            return &kAvx2Table;
        if ((env == nullptr || std::strcmp(env, "auto") == 0 || env[0] == '\0') &&
            avx2_available())
            return &kAvx2Table;
#endif
        return &kScalarTable;
    }();
    return *chosen;
}

// atomic so concurrent solves (e.g. parallel dual-ascent rounds) can read the
// dispatch table while a test thread swaps ISAs; tables themselves are const
std::atomic<const Table*> g_table{nullptr};

const Table& table() {
    const Table* t = g_table.load(std::memory_order_acquire);
    if (t == nullptr) {
        t = &pick_initial_table();
        g_table.store(t, std::memory_order_release);
    }
    return *t;
}

} // namespace

Isa active_isa() { return table().isa; }

void force_isa(Isa isa) {
    if (isa == Isa::scalar) {
        g_table.store(&kScalarTable, std::memory_order_release);
        return;
    }
#if defined(MICRODISPATCH_HAVE_AVX2)
    if (isa == Isa::avx2 && avx2_available()) {
        g_table.store(&kAvx2Table, std::memory_order_release);
        return;
    }
#endif
    throw std::invalid_argument("requested SIMD ISA not available on this machine");
}

void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n) {
    table().axpby(a, x, b, y, out, n);
}

void accum_scaled_diff(double c, const double* u, const double* v, double* y,
                       std::size_t n) {
    table().accum_scaled_diff(c, u, v, y, n);
}

void scaled_clamp(const double* x, const double* scale, const double* lo,
                  const double* hi, double* out, std::size_t n) {
    table().scaled_clamp(x, scale, lo, hi, out, n);
}

double dot(const double* x, const double* y, std::size_t n) {
    return table().dot(x, y, n);
}

double max_abs_diff(const double* x, const double* y, std::size_t n) {
    return table().max_abs_diff(x, y, n);
}

double max_abs(const double* x, std::size_t n) { return table().max_abs(x, n); }

} // namespace microdispatch::kernels
