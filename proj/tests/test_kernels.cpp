#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "microdispatch/kernels.hpp"
#include "microdispatch/rng.hpp"

namespace kn = microdispatch::kernels;
using microdispatch::SplitMix64;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> random_vec(SplitMix64& g, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = g.next_in(lo, hi);
    return v;
}

// RAII guard so a failing test can't leave the forced ISA behind
struct IsaGuard {
    kn::Isa prev;
    IsaGuard() : prev(kn::active_isa()) {}
    ~IsaGuard() { kn::force_isa(prev); }
};

} // namespace

TEST_CASE("kernels: scalar reference values") {
    const std::vector<double> x{1.0, -2.0, 3.0};
    const std::vector<double> y{0.5, 0.5, -1.0};
    std::vector<double> out(3);

    kn::scalar::axpby(2.0, x.data(), 3.0, y.data(), out.data(), 3);
    CHECK(out == std::vector<double>{3.5, -2.5, 3.0});

    std::vector<double> acc{1.0, 1.0, 1.0};
    kn::scalar::accum_scaled_diff(0.5, x.data(), y.data(), acc.data(), 3);
    CHECK(acc[0] == doctest::Approx(1.25));
    CHECK(acc[1] == doctest::Approx(-0.25));
    CHECK(acc[2] == doctest::Approx(3.0));

    const std::vector<double> scale{1.0, 2.0, 1.0};
    const std::vector<double> lo{0.0, -kInf, -1.0};
    const std::vector<double> hi{0.5, kInf, 1.0};
    kn::scalar::scaled_clamp(x.data(), scale.data(), lo.data(), hi.data(), out.data(), 3);
    CHECK(out == std::vector<double>{0.5, -4.0, 1.0});

    CHECK(kn::scalar::dot(x.data(), y.data(), 3) == doctest::Approx(-3.5));
    CHECK(kn::scalar::max_abs_diff(x.data(), y.data(), 3) == doctest::Approx(4.0));
    CHECK(kn::scalar::max_abs(x.data(), 3) == doctest::Approx(3.0));
}

TEST_CASE("kernels: active dispatch matches scalar reference on random data") {
    // exercises remainder handling: lengths straddle the 4-lane width
    SplitMix64 g(20240817ULL);
    for (std::size_t n : {std::size_t{1}, std::size_t{3}, std::size_t{4}, std::size_t{5},
                          std::size_t{17}, std::size_t{64}, std::size_t{129},
                          std::size_t{1000}}) {
        auto x = random_vec(g, n, -50.0, 50.0);
        auto y = random_vec(g, n, -50.0, 50.0);
        auto scale = random_vec(g, n, 0.1, 2.0);
        auto lo = random_vec(g, n, -30.0, 0.0);
        auto hi = random_vec(g, n, 0.0, 30.0);
        // sprinkle infinite bounds like the solver's free variables have
        for (std::size_t i = 0; i < n; i += 7) {
            lo[i] = -kInf;
            hi[i] = kInf;
        }

        std::vector<double> ref(n), got(n);

        kn::scalar::axpby(1.7, x.data(), -0.3, y.data(), ref.data(), n);
        kn::axpby(1.7, x.data(), -0.3, y.data(), got.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-14));

        ref = y;
        got = y;
        kn::scalar::accum_scaled_diff(0.9, x.data(), y.data(), ref.data(), n);
        kn::accum_scaled_diff(0.9, x.data(), y.data(), got.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-14));

        kn::scalar::scaled_clamp(x.data(), scale.data(), lo.data(), hi.data(), ref.data(), n);
        kn::scaled_clamp(x.data(), scale.data(), lo.data(), hi.data(), got.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-14));

        const double dref = kn::scalar::dot(x.data(), y.data(), n);
        const double dgot = kn::dot(x.data(), y.data(), n);
        CHECK(dgot == doctest::Approx(dref).epsilon(1e-12));

        // order-independent reductions must agree bit for bit
        CHECK(kn::max_abs_diff(x.data(), y.data(), n) ==
              kn::scalar::max_abs_diff(x.data(), y.data(), n));
        CHECK(kn::max_abs(x.data(), n) == kn::scalar::max_abs(x.data(), n));
    }
}

TEST_CASE("kernels: forcing the scalar ISA routes the dispatch table") {
    IsaGuard guard;
    kn::force_isa(kn::Isa::scalar);
    CHECK(kn::active_isa() == kn::Isa::scalar);
    const std::vector<double> x{2.0, 4.0};
    const std::vector<double> y{1.0, 1.0};
    CHECK(kn::dot(x.data(), y.data(), 2) == doctest::Approx(6.0));
}
