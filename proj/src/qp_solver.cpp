#include "microdispatch/qp_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "microdispatch/errors.hpp"
#include "microdispatch/kernels.hpp"
#include "microdispatch/logging.hpp"

namespace microdispatch {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

// =====================================================================
// CompiledProblem internals
//
// The solver is Douglas-Rachford splitting on
//     f(z) = sum_i w_i z_i^2 + q_i z_i + I_box(z)      (separable)
//     g(z) = I_{A z = b}(z)                            (affine)
// in a diagonally scaled space where every positive weight becomes 1.
// prox_{gamma f} is a closed-form elementwise shrink-and-clamp;
// prox_{gamma g} is the projection onto the affine set, backed by one
// sparse Cholesky factorization of A A^T per problem structure. Once the
// iterate settles, the active box constraints are read off and the point
// is polished by a single equality-constrained KKT solve, accepted only
// if primal feasibility and the dual sign conditions verify.
// =====================================================================
struct CompiledProblem::Impl {
    DispatchProblem prob;

    int n = 0;  // variables
    int m = 0;  // equality rows

    // scaling: z_original = colscale .* z_scaled; row r of A times rowscale[r]
    std::vector<double> colscale;
    std::vector<double> rowscale;

    // scaled data
    std::vector<double> wt;  // scaled weights (1 where weighted, 0 on slacks)
    std::vector<double> qs;  // scaled linear cost
    std::vector<double> lo_s, hi_s;
    SpMat As;   // m x n
    SpMat AsT;  // n x m, kept explicitly for fast transpose products
    Vec bs;
    Eigen::SimplicialLDLT<SpMat> gram;  // factorization of As As^T (+ reg)
    bool has_linear = false;

    void compile();
    void set_linear_scaled();
    DispatchSolution run(const SolveOptions& opts) const;
    bool polish(const std::vector<double>& x_scaled, double active_eps,
                DispatchSolution& out) const;
};

void CompiledProblem::Impl::compile() {
    n = prob.num_vars;
    m = prob.rows();

    colscale.assign(n, 1.0);
    for (int i = 0; i < n; ++i)
        if (prob.cost_weight[i] > 0.0) colscale[i] = 1.0 / std::sqrt(prob.cost_weight[i]);

    // Zero-weight columns (SoC states, frozen transfers) carry no cost, so the
    // weight scaling leaves them at 1. That wrecks the geometry of the
    // dynamics rows: the bounded state column keeps coefficient ~1 while the
    // storage control enters with sampling_time/capacity ~ 1e-3, and the
    // splitting crawls along the nearly-degenerate angle between the box and
    // the affine set. Equilibrate each weightless column against the strongest
    // weighted coefficient in the rows it shares so every row ends up with
    // comparable entries.
    {
        std::vector<double> row_weighted_max(m, 0.0);
        for (int r = 0; r < m; ++r)
            for (int p = prob.row_ptr[r]; p < prob.row_ptr[r + 1]; ++p) {
                const int c = prob.col_idx[p];
                if (prob.cost_weight[c] > 0.0)
                    row_weighted_max[r] = std::max(
                        row_weighted_max[r], std::fabs(prob.coeff[p] * colscale[c]));
            }
        std::vector<double> peer(n, 0.0), own(n, 0.0);
        for (int r = 0; r < m; ++r)
            for (int p = prob.row_ptr[r]; p < prob.row_ptr[r + 1]; ++p) {
                const int c = prob.col_idx[p];
                if (prob.cost_weight[c] > 0.0) continue;
                peer[c] = std::max(peer[c], row_weighted_max[r]);
                own[c] = std::max(own[c], std::fabs(prob.coeff[p]));
            }
        for (int i = 0; i < n; ++i)
            if (prob.cost_weight[i] <= 0.0 && peer[i] > 0.0 && own[i] > 0.0)
                colscale[i] = peer[i] / own[i];
    }

    wt.assign(n, 0.0);
    lo_s.assign(n, 0.0);
    hi_s.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        wt[i] = prob.cost_weight[i] * colscale[i] * colscale[i];  // 1 or 0
        lo_s[i] = prob.lower[i] / colscale[i];
        hi_s[i] = prob.upper[i] / colscale[i];
    }
    set_linear_scaled();

    // assemble A with column scaling, then equilibrate rows to unit max-abs
    rowscale.assign(m, 1.0);
    for (int r = 0; r < m; ++r) {
        double rowmax = 0.0;
        for (int p = prob.row_ptr[r]; p < prob.row_ptr[r + 1]; ++p)
            rowmax = std::max(rowmax,
                              std::fabs(prob.coeff[p] * colscale[prob.col_idx[p]]));
        rowscale[r] = rowmax > 0.0 ? 1.0 / rowmax : 1.0;
    }
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(prob.coeff.size());
    for (int r = 0; r < m; ++r)
        for (int p = prob.row_ptr[r]; p < prob.row_ptr[r + 1]; ++p)
            trips.emplace_back(r, prob.col_idx[p],
                               prob.coeff[p] * colscale[prob.col_idx[p]] * rowscale[r]);
    As.resize(m, n);
    As.setFromTriplets(trips.begin(), trips.end());
    As.makeCompressed();
    AsT = As.transpose();
    bs.resize(m);
    for (int r = 0; r < m; ++r) bs[r] = prob.rhs[r] * rowscale[r];

    // factor As As^T; escalate regularization only if the factorization balks
    SpMat gramM = SpMat(As * AsT).pruned();
    double reg = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
        if (attempt == 0) {
            gram.compute(gramM);
        } else {
            reg = (reg == 0.0) ? 1e-10 : reg * 1e4;
            SpMat regd = gramM;
            for (int r = 0; r < m; ++r) regd.coeffRef(r, r) += reg;
            gram.compute(regd);
        }
        if (gram.info() == Eigen::Success) return;
    }
    throw SolverError("equality-constraint Gram matrix could not be factorized");
}

void CompiledProblem::Impl::set_linear_scaled() {
    qs.assign(n, 0.0);
    has_linear = false;
    for (int i = 0; i < n; ++i) {
        qs[i] = prob.cost_linear[i] * colscale[i];
        if (qs[i] != 0.0) has_linear = true;
    }
}

namespace {

// Assemble and solve the equality-constrained KKT system for a given active
// set, in original units:
//   [ 2W     Abar^T ] [ z  ]   [ -q   ]
//   [ Abar   0      ] [ nu ] = [ bbar ]
// where Abar stacks all equality rows plus e_i rows for the active bounds.
// Lightly regularized to quasi-definite form, then refined against the true
// system. Returns false if the factorization fails outright.
bool solve_kkt(const DispatchProblem& prob, const std::vector<int>& active,
               const std::vector<double>& active_val, Vec& z_out, Vec& nu_out) {
    const int n = prob.num_vars;
    const int me = prob.rows();
    const int ma = static_cast<int>(active.size());
    const int N = n + me + ma;

    double wmax = 1.0;
    for (int i = 0; i < n; ++i) wmax = std::max(wmax, 2.0 * prob.cost_weight[i]);
    const double reg = 1e-11 * wmax;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(prob.coeff.size() * 2 + static_cast<std::size_t>(N) + ma * 2);
    for (int i = 0; i < n; ++i)
        trips.emplace_back(i, i, 2.0 * prob.cost_weight[i] + reg);
    for (int r = 0; r < me; ++r) {
        for (int p = prob.row_ptr[r]; p < prob.row_ptr[r + 1]; ++p) {
            trips.emplace_back(n + r, prob.col_idx[p], prob.coeff[p]);
            trips.emplace_back(prob.col_idx[p], n + r, prob.coeff[p]);
        }
        trips.emplace_back(n + r, n + r, -reg);
    }
    for (int a = 0; a < ma; ++a) {
        trips.emplace_back(n + me + a, active[a], 1.0);
        trips.emplace_back(active[a], n + me + a, 1.0);
        trips.emplace_back(n + me + a, n + me + a, -reg);
    }

    SpMat K(N, N);
    K.setFromTriplets(trips.begin(), trips.end());
    K.makeCompressed();

    Eigen::SimplicialLDLT<SpMat> ldlt;
    ldlt.compute(K);
    if (ldlt.info() != Eigen::Success) return false;

    Vec rhs(N);
    for (int i = 0; i < n; ++i) rhs[i] = -prob.cost_linear[i];
    for (int r = 0; r < me; ++r) rhs[n + r] = prob.rhs[r];
    for (int a = 0; a < ma; ++a) rhs[n + me + a] = active_val[a];

    Vec sol = ldlt.solve(rhs);
    for (int round = 0; round < 3; ++round) {
        // residual against the *unregularized* KKT system
        Vec resid = rhs - K * sol;
        for (int i = 0; i < n; ++i) resid[i] += reg * sol[i];
        for (int r = n; r < N; ++r) resid[r] -= reg * sol[r];
        if (resid.lpNorm<Eigen::Infinity>() <
            1e-13 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
            break;
        sol += ldlt.solve(resid);
    }

    z_out = sol.head(n);
    nu_out = sol.tail(me + ma);
    return true;
}

} // namespace

bool CompiledProblem::Impl::polish(const std::vector<double>& x_scaled,
                                   double active_eps, DispatchSolution& out) const {
    // side: -1 lower, +1 upper, 0 fixed (lower == upper), INT_MIN free
    std::vector<int> side(n, std::numeric_limits<int>::min());
    for (int i = 0; i < n; ++i) {
        if (prob.lower[i] == prob.upper[i]) {
            side[i] = 0;
            continue;
        }
        const double span = 1.0 + std::min(std::fabs(lo_s[i]), std::fabs(hi_s[i]));
        if (lo_s[i] > -kInf && x_scaled[i] - lo_s[i] <= active_eps * span)
            side[i] = -1;
        else if (hi_s[i] < kInf && hi_s[i] - x_scaled[i] <= active_eps * span)
            side[i] = +1;
    }

    // Primal-dual active-set refinement. The splitting iterate only seeds the
    // working set; each KKT solve then corrects it — coordinates whose
    // unconstrained value leaves the box get pinned, pinned coordinates whose
    // multiplier has the wrong sign get released. Near a degenerate corner
    // the seed is routinely off by a couple of coordinates, so a fixed guess
    // would reject exactly the solves that need polishing most.
    const double box_tol = 1e-7;
    const int me = prob.rows();
    Vec z, nu;
    bool clean = false;
    for (int round = 0; round < 30 && !clean; ++round) {
        std::vector<int> active;
        std::vector<double> active_val;
        for (int i = 0; i < n; ++i) {
            if (side[i] == std::numeric_limits<int>::min()) continue;
            active.push_back(i);
            active_val.push_back(side[i] == +1 ? prob.upper[i] : prob.lower[i]);
        }
        if (!solve_kkt(prob, active, active_val, z, nu)) {
            log::debug("polish: kkt factorization failed");
            return false;
        }

        double grad_scale = 1.0;
        for (int i = 0; i < n; ++i)
            grad_scale = std::max(grad_scale, std::fabs(2.0 * prob.cost_weight[i] * z[i] +
                                                        prob.cost_linear[i]));
        const double sign_tol = 1e-6 * grad_scale;

        clean = true;
        // release active bounds whose multiplier pushes the wrong way
        for (std::size_t a = 0; a < active.size(); ++a) {
            const int i = active[a];
            if (side[i] == 0) continue;
            const double mult = nu[me + static_cast<int>(a)];
            if ((side[i] == -1 && mult > sign_tol) || (side[i] == +1 && mult < -sign_tol)) {
                side[i] = std::numeric_limits<int>::min();
                clean = false;
            }
        }
        // pin free coordinates the KKT solution pushed out of their box
        for (int i = 0; i < n; ++i) {
            if (side[i] != std::numeric_limits<int>::min()) continue;
            const double span = 1.0 + std::fabs(prob.lower[i]) + std::fabs(prob.upper[i]);
            if (z[i] < prob.lower[i] - box_tol * span) {
                side[i] = -1;
                clean = false;
            } else if (z[i] > prob.upper[i] + box_tol * span) {
                side[i] = +1;
                clean = false;
            }
        }
    }
    if (!clean) {
        log::debug("polish: active set did not settle");
        return false;
    }

    // snap box round-off so box residuals vanish exactly
    std::vector<double> zf(z.data(), z.data() + n);
    for (int i = 0; i < n; ++i) zf[i] = std::clamp(zf[i], prob.lower[i], prob.upper[i]);

    const double viol = prob.max_violation(zf);
    double rhs_scale = 1.0;
    for (int r = 0; r < me; ++r) rhs_scale = std::max(rhs_scale, std::fabs(prob.rhs[r]));
    if (viol > 1e-8 * rhs_scale) {
        log::debug("polish: final violation %.3e", viol);
        return false;
    }

    out.z = std::move(zf);
    out.objective = prob.objective(out.z);
    out.max_residual = viol;
    out.status = SolveStatus::optimal;
    out.polished = true;
    return true;
}

DispatchSolution CompiledProblem::Impl::run(const SolveOptions& opts) const {
    namespace kn = microdispatch::kernels;

    DispatchSolution sol;
    const double gamma = opts.gamma;
    const double relax = opts.over_relaxation;

    // prox precompute: x = clamp((w - gamma*qs) .* inv_denom)
    std::vector<double> inv_denom(n);
    for (int i = 0; i < n; ++i) inv_denom[i] = 1.0 / (1.0 + 2.0 * gamma * wt[i]);

    std::vector<double> wv(n, 0.0);
    if (opts.warm_start != nullptr && opts.warm_start->size() == static_cast<std::size_t>(n))
        wv = *opts.warm_start;

    std::vector<double> x(n), y(n), t(n), x_prev(n, 0.0);
    Vec mscratch(m), usol(m);

    double prev_gap = kInf;
    int stagnant_checks = 0;
    int certificate_attempts = 0;
    const int check_every = 25;
    double last_polish_gap = kInf;
    int polish_attempts = 0;

    auto prox_step = [&](const std::vector<double>& in, std::vector<double>& outv) {
        if (has_linear) {
            kn::axpby(1.0, in.data(), -gamma, qs.data(), t.data(), n);
            kn::scaled_clamp(t.data(), inv_denom.data(), lo_s.data(), hi_s.data(),
                             outv.data(), n);
        } else {
            kn::scaled_clamp(in.data(), inv_denom.data(), lo_s.data(), hi_s.data(),
                             outv.data(), n);
        }
    };

    auto project_affine = [&](std::vector<double>& inout) {
        Eigen::Map<Vec> v(inout.data(), n);
        mscratch.noalias() = As * v;
        mscratch -= bs;
        usol = gram.solve(mscratch);
        v.noalias() -= AsT * usol;
    };

    // Exact separation certificate for an empty box/affine intersection.
    // The least-squares multiplier of projecting the (box-feasible) prox
    // point onto {As z = bs} proposes lambda; the intersection is provably
    // empty iff lambda' bs exceeds the box support function of As' lambda.
    // A stalled iterate alone is never trusted: slow crawls along badly
    // angled corners look identical to genuine infeasibility.
    auto certify_infeasible = [&](const std::vector<double>& xbox, double& margin) {
        Eigen::Map<const Vec> v(xbox.data(), n);
        mscratch.noalias() = As * v;
        mscratch = bs - mscratch;
        Vec lambda = gram.solve(mscratch);
        const double lmax = lambda.lpNorm<Eigen::Infinity>();
        if (!(lmax > 0.0) || !std::isfinite(lmax)) return false;
        lambda /= lmax;
        Vec al = AsT * lambda;
        const double snap = 1e-12 * al.lpNorm<Eigen::Infinity>();
        double support = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = std::fabs(al[i]) <= snap ? 0.0 : al[i];
            if (a > 0.0) {
                if (hi_s[i] >= kInf) return false;
                support += a * hi_s[i];
            } else if (a < 0.0) {
                if (lo_s[i] <= -kInf) return false;
                support += a * lo_s[i];
            }
        }
        const double sep = lambda.dot(bs);
        margin = sep - support;
        return margin > 1e-9 * (1.0 + std::fabs(sep));
    };

    auto finish_unpolished = [&](int iters) {
        sol.z.assign(n, 0.0);
        for (int i = 0; i < n; ++i)
            sol.z[i] = std::clamp(x[i] * colscale[i], prob.lower[i], prob.upper[i]);
        sol.objective = prob.objective(sol.z);
        sol.max_residual = prob.max_violation(sol.z);
        sol.iterations = iters;
        sol.splitting_state = wv;
    };

    int iter = 0;
    for (; iter < opts.max_iters; ++iter) {
        prox_step(wv, x);
        kn::axpby(2.0, x.data(), -1.0, wv.data(), y.data(), n);
        project_affine(y);
        kn::accum_scaled_diff(relax, y.data(), x.data(), wv.data(), n);

        if ((iter + 1) % check_every != 0) continue;

        // fixed-point gap in scaled and original units, plus iterate magnitude
        double gap_s = 0.0, gap_u = 0.0, xmag_s = 1.0, xmag_u = 1.0;
        for (int i = 0; i < n; ++i) {
            const double d = std::fabs(x[i] - y[i]);
            gap_s = std::max(gap_s, d);
            gap_u = std::max(gap_u, colscale[i] * d);
            xmag_s = std::max(xmag_s, std::fabs(x[i]));
            xmag_u = std::max(xmag_u, std::fabs(colscale[i] * x[i]));
        }

        // polish opportunistically once the iterate is in the right basin;
        // each retry must follow real progress (4x gap reduction) so a
        // hard-to-identify active set cannot drain the budget in one burst
        if (opts.polish && gap_u <= 1e-3 * xmag_u &&
            (polish_attempts == 0 || gap_u <= 0.25 * last_polish_gap) &&
            polish_attempts < 40) {
            ++polish_attempts;
            last_polish_gap = gap_u;
            if (polish(x, std::max(10.0 * gap_s, 1e-9), sol)) {
                sol.iterations = iter + 1;
                sol.splitting_state = wv;
                return sol;
            }
        }

        if (gap_u <= opts.tol) {
            if (opts.polish && polish(x, std::max(10.0 * gap_s, 1e-9), sol)) {
                sol.iterations = iter + 1;
                sol.splitting_state = wv;
                return sol;
            }
            finish_unpolished(iter + 1);
            if (sol.max_residual <= std::max(10.0 * opts.tol, 1e-9)) {
                sol.status = SolveStatus::optimal;
            } else {
                sol.status = SolveStatus::iteration_limit;
                sol.message = "fixed-point gap converged but residual above tolerance";
            }
            return sol;
        }

        // infeasibility: the gap stalls at a positive level while the prox
        // iterate stops moving (the splitting converges to the closest
        // box/affine pair when the intersection is empty). The stall only
        // selects a candidate; the declaration requires the certificate.
        const double xmove = kn::max_abs_diff(x.data(), x_prev.data(), n);
        const bool gap_stalled = std::fabs(gap_u - prev_gap) <= 1e-6 * std::max(gap_u, 1e-12);
        const bool x_stalled = xmove <= 1e-9 * xmag_s;
        if (iter > 500 && gap_u > 1e3 * opts.tol && gap_stalled && x_stalled) {
            if (++stagnant_checks >= 4 && certificate_attempts < 8) {
                ++certificate_attempts;
                stagnant_checks = 0;
                double margin = 0.0;
                if (certify_infeasible(x, margin)) {
                    finish_unpolished(iter + 1);
                    sol.status = SolveStatus::infeasible;
                    sol.message = "no point satisfies bounds and balance/dynamics rows "
                                  "simultaneously (set distance ~" +
                                  std::to_string(gap_u) + ", separation margin " +
                                  std::to_string(margin) + ")";
                    return sol;
                }
                log::debug("stalled gap %.3e at iter %d not certified infeasible; "
                           "continuing", gap_u, iter + 1);
            }
        } else {
            stagnant_checks = 0;
        }
        prev_gap = gap_u;
        std::copy(x.begin(), x.end(), x_prev.begin());
    }

    finish_unpolished(iter);
    sol.status = SolveStatus::iteration_limit;
    sol.message = "iteration limit reached";
    return sol;
}

CompiledProblem::CompiledProblem(DispatchProblem prob) : impl_(new Impl) {
    impl_->prob = std::move(prob);
    impl_->compile();
}

CompiledProblem::~CompiledProblem() = default;
CompiledProblem::CompiledProblem(CompiledProblem&&) noexcept = default;
CompiledProblem& CompiledProblem::operator=(CompiledProblem&&) noexcept = default;

const DispatchProblem& CompiledProblem::problem() const { return impl_->prob; }

void CompiledProblem::set_linear_cost(const std::vector<double>& linear) {
    if (linear.size() != static_cast<std::size_t>(impl_->n))
        throw std::invalid_argument("linear cost size mismatch");
    impl_->prob.cost_linear = linear;
    impl_->set_linear_scaled();
}

DispatchSolution CompiledProblem::solve(const SolveOptions& opts) const {
    return impl_->run(opts);
}

DispatchSolution solve_qp(const DispatchProblem& prob, const SolveOptions& opts) {
    CompiledProblem compiled(prob);
    return compiled.solve(opts);
}

} // namespace microdispatch
