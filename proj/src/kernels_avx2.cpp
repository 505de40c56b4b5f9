// AVX2 variants of the solver vector kernels. This TU is the only one built
// with -mavx2/-mfma; it is reached exclusively through the runtime dispatch
// table after __builtin_cpu_supports("avx2") has confirmed the machine.

#include "microdispatch/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace microdispatch::kernels::avx2 {

void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d vy = _mm256_loadu_pd(y + i);
        __m256d r = _mm256_fmadd_pd(va, vx, _mm256_mul_pd(vb, vy));
        _mm256_storeu_pd(out + i, r);
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void accum_scaled_diff(double c, const double* u, const double* v, double* y,
                       std::size_t n) {
    const __m256d vc = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vu = _mm256_loadu_pd(u + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        __m256d vy = _mm256_loadu_pd(y + i);
        __m256d r = _mm256_fmadd_pd(vc, _mm256_sub_pd(vu, vv), vy);
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] += c * (u[i] - v[i]);
}

void scaled_clamp(const double* x, const double* scale, const double* lo,
                  const double* hi, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d vs = _mm256_loadu_pd(scale + i);
        __m256d vl = _mm256_loadu_pd(lo + i);
        __m256d vh = _mm256_loadu_pd(hi + i);
        __m256d z = _mm256_mul_pd(vx, vs);
        z = _mm256_min_pd(_mm256_max_pd(z, vl), vh);
        _mm256_storeu_pd(out + i, z);
    }
    for (; i < n; ++i) {
        double z = x[i] * scale[i];
        out[i] = std::min(std::max(z, lo[i]), hi[i]);
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d vy = _mm256_loadu_pd(y + i);
        acc = _mm256_fmadd_pd(vx, vy, acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double sum = lanes[0] + lanes[1] + lanes[2] + lanes[3];
    for (; i < n; ++i) sum += x[i] * y[i];
    return sum;
}

double max_abs_diff(const double* x, const double* y, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_max_pd(acc, _mm256_andnot_pd(sign_mask, d));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    for (; i < n; ++i) m = std::max(m, std::fabs(x[i] - y[i]));
    return m;
}

double max_abs(const double* x, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_max_pd(acc, _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(x + i)));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    for (; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

} // namespace microdispatch::kernels::avx2
