#include "qp_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "microdispatch/rng.hpp"

namespace microdispatch::test_oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// effective sampling interval for a variable: box clipped to a finite range
std::pair<double, double> sample_range(double lo, double hi, double span) {
    const double l = lo > -kInf ? lo : -span;
    const double h = hi < kInf ? hi : span;
    return {l, std::max(l, h)};
}

} // namespace

OracleResult brute_force_solve(const DispatchProblem& prob, std::uint64_t seed,
                               double tol) {
    const int n = prob.num_vars;
    const int m = prob.rows();

    // column-access view of A for incremental residual updates
    std::vector<std::vector<std::pair<int, double>>> cols(n);
    for (int r = 0; r < m; ++r)
        for (int p = prob.row_ptr[r]; p < prob.row_ptr[r + 1]; ++p)
            cols[prob.col_idx[p]].emplace_back(r, prob.coeff[p]);

    double span = 1.0;
    for (int r = 0; r < m; ++r) span = std::max(span, 2.0 * std::fabs(prob.rhs[r]));

    auto residual_of = [&](const std::vector<double>& z, std::vector<double>& r) {
        r.assign(m, 0.0);
        for (int rr = 0; rr < m; ++rr) {
            double acc = -prob.rhs[rr];
            for (int p = prob.row_ptr[rr]; p < prob.row_ptr[rr + 1]; ++p)
                acc += prob.coeff[p] * z[prob.col_idx[p]];
            r[rr] = acc;
        }
    };
    auto penalized = [&](const std::vector<double>& z, double rho) {
        std::vector<double> r;
        residual_of(z, r);
        double acc = prob.objective(z);
        for (double v : r) acc += 0.5 * rho * v * v;
        return acc;
    };

    // ---- stage 1: coarse sampling of the box picks a starting point ----
    const double rho0 = 10.0;
    std::vector<double> best(n, 0.0);
    for (int i = 0; i < n; ++i) {
        auto [l, h] = sample_range(prob.lower[i], prob.upper[i], span);
        best[i] = std::clamp(0.0, l, h);
    }
    double best_val = penalized(best, rho0);

    SplitMix64 g(mix_seed(seed, 0xabcdef12ULL));
    std::vector<double> cand(n);
    const int grid_points = 5;
    // per-variable grid sweeps (a dense grid over all variables jointly is
    // hopeless beyond a handful of dimensions; sweeping one variable at a time
    // over a dense 1-D grid keeps the same coverage idea tractable) ...
    for (int i = 0; i < n; ++i) {
        auto [l, h] = sample_range(prob.lower[i], prob.upper[i], span);
        for (int gp = 0; gp < grid_points; ++gp) {
            cand = best;
            cand[i] = l + (h - l) * gp / (grid_points - 1);
            const double val = penalized(cand, rho0);
            if (val < best_val) {
                best_val = val;
                best = cand;
            }
        }
    }
    // ... plus seeded random box points
    for (int trial = 0; trial < 16; ++trial) {
        for (int i = 0; i < n; ++i) {
            auto [l, h] = sample_range(prob.lower[i], prob.upper[i], span);
            cand[i] = g.next_in(l, h);
        }
        const double val = penalized(cand, rho0);
        if (val < best_val) {
            best_val = val;
            best = cand;
        }
    }

    // ---- stage 2: augmented-Lagrangian loop with exact coordinate descent ----
    std::vector<double> z = best;
    std::vector<double> y(m, 0.0);   // multipliers
    std::vector<double> r(m, 0.0);   // running A z - b
    residual_of(z, r);

    double rho = rho0;
    OracleResult out;
    double prev_outer_res = kInf;

    for (int outer = 0; outer < 300; ++outer) {
        // inner: cyclic exact coordinate descent on the augmented Lagrangian
        for (int sweep = 0; sweep < 50000; ++sweep) {
            double max_move = 0.0;
            for (int i = 0; i < n; ++i) {
                double grad = 2.0 * prob.cost_weight[i] * z[i] + prob.cost_linear[i];
                double curv = 2.0 * prob.cost_weight[i];
                for (const auto& [rr, c] : cols[i]) {
                    grad += c * (y[rr] + rho * r[rr]);
                    curv += rho * c * c;
                }
                if (curv <= 0.0) continue;  // unconstrained flat coordinate
                double zi = z[i] - grad / curv;
                zi = std::clamp(zi, prob.lower[i], prob.upper[i]);
                const double delta = zi - z[i];
                if (delta != 0.0) {
                    z[i] = zi;
                    for (const auto& [rr, c] : cols[i]) r[rr] += c * delta;
                    max_move = std::max(max_move, std::fabs(delta));
                }
            }
            if (max_move <= 1e-12 * span) break;
        }

        double res = 0.0;
        for (double v : r) res = std::max(res, std::fabs(v));
        if (res <= tol) {
            out.converged = true;
            break;
        }
        for (int rr = 0; rr < m; ++rr) y[rr] += rho * r[rr];
        if (res > 0.5 * prev_outer_res) rho *= 2.0;
        prev_outer_res = res;
    }

    residual_of(z, r);
    out.residual = 0.0;
    for (double v : r) out.residual = std::max(out.residual, std::fabs(v));
    out.z = std::move(z);
    out.objective = prob.objective(out.z);
    out.converged = out.converged && out.residual <= 10.0 * tol;
    return out;
}

} // namespace microdispatch::test_oracle
