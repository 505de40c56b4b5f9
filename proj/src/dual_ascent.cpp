#include "microdispatch/dual_ascent.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>

#include "microdispatch/errors.hpp"
#include "microdispatch/logging.hpp"
#include "microdispatch/qp.hpp"

namespace microdispatch {

namespace {

struct RelaxedEdge {
    BusId a, b;     // a < b, both inside the coalition
    int mg_a, mg_b; // positions in `microgrids`
};

} // namespace

DistributedSolveResult solve_coalition_distributed(
    const NetworkModel& net, const std::vector<std::vector<BusId>>& microgrids, int k, int h,
    const std::vector<double>& soc_state, const DistributedSolveOptions& opts) {
    const int g = static_cast<int>(microgrids.size());
    if (g < 2)
        throw std::invalid_argument(
            "solve_coalition_distributed: a singleton coalition is a plain local solve");

    // coalition bus set and bus -> member-microgrid map
    std::vector<BusId> coalition;
    std::vector<int> owner(static_cast<size_t>(net.bus_count()), -1);
    for (int p = 0; p < g; ++p) {
        if (microgrids[static_cast<size_t>(p)].empty())
            throw std::invalid_argument("solve_coalition_distributed: empty member set");
        for (BusId b : microgrids[static_cast<size_t>(p)]) {
            if (b < 0 || b >= net.bus_count() || owner[static_cast<size_t>(b)] != -1)
                throw std::invalid_argument(
                    "solve_coalition_distributed: member sets must be disjoint valid buses");
            owner[static_cast<size_t>(b)] = p;
            coalition.push_back(b);
        }
    }
    std::sort(coalition.begin(), coalition.end());

    // couplings to price: coalition-internal edges that cross microgrids
    std::vector<RelaxedEdge> relaxed;
    for (auto [a, b] : net.edges) {
        const int pa = owner[static_cast<size_t>(a)];
        const int pb = owner[static_cast<size_t>(b)];
        if (pa >= 0 && pb >= 0 && pa != pb) relaxed.push_back({a, b, pa, pb});
    }

    // one compiled local problem per microgrid: transfers toward coalition
    // siblings free (priced), transfers leaving the coalition frozen
    std::vector<CompiledProblem> local;
    local.reserve(static_cast<size_t>(g));
    for (int p = 0; p < g; ++p) {
        std::vector<BusId> mine = microgrids[static_cast<size_t>(p)];
        std::sort(mine.begin(), mine.end());
        DispatchProblemOptions po;
        po.boundary = BoundaryPolicy::frozen;
        for (BusId b : coalition)
            if (!std::binary_search(mine.begin(), mine.end(), b)) po.free_neighbors.push_back(b);
        local.emplace_back(build_dispatch_problem(net, mine, k, h, soc_state, po));
    }

    // local variable indices of each priced coupling, per step
    std::vector<int> var_a(relaxed.size() * static_cast<size_t>(h));
    std::vector<int> var_b(relaxed.size() * static_cast<size_t>(h));
    for (size_t e = 0; e < relaxed.size(); ++e)
        for (int t = 0; t < h; ++t) {
            var_a[e * static_cast<size_t>(h) + static_cast<size_t>(t)] =
                local[static_cast<size_t>(relaxed[e].mg_a)].problem().var_index(
                    relaxed[e].a, t, VarKind::transfer, relaxed[e].b);
            var_b[e * static_cast<size_t>(h) + static_cast<size_t>(t)] =
                local[static_cast<size_t>(relaxed[e].mg_b)].problem().var_index(
                    relaxed[e].b, t, VarKind::transfer, relaxed[e].a);
        }

    // fixed ascent step tied to the strong convexity of the transfer costs;
    // the divergence guard below recovers from an overestimate
    double q_max = 0.0;
    for (const RelaxedEdge& e : relaxed) {
        q_max = std::max(q_max, net.buses[static_cast<size_t>(e.a)].cost_transfer.at(e.b));
        q_max = std::max(q_max, net.buses[static_cast<size_t>(e.b)].cost_transfer.at(e.a));
    }
    double sigma = (q_max > 0.0) ? 1.0 / (2.0 * q_max) : 0.0;

    // one message = one microgrid handing its boundary plan to one neighbour
    std::set<std::pair<int, int>> channels;
    for (const RelaxedEdge& e : relaxed) {
        channels.insert({e.mg_a, e.mg_b});
        channels.insert({e.mg_b, e.mg_a});
    }
    const long sends_per_round = static_cast<long>(channels.size());

    std::vector<double> lambda(relaxed.size() * static_cast<size_t>(h), 0.0);
    std::vector<std::vector<double>> linear(static_cast<size_t>(g));
    std::vector<DispatchSolution> plans(static_cast<size_t>(g));
    std::vector<std::vector<double>> warm(static_cast<size_t>(g));
    for (int p = 0; p < g; ++p)
        linear[static_cast<size_t>(p)].assign(
            static_cast<size_t>(local[static_cast<size_t>(p)].problem().num_vars), 0.0);

    SolveOptions inner;
    inner.tol = std::max(opts.tol * 1e-2, 1e-10);

    DistributedSolveResult result;
    double best_residual = std::numeric_limits<double>::infinity();

    auto solve_local = [&](int p, bool strict) {
        auto& lin = linear[static_cast<size_t>(p)];
        std::fill(lin.begin(), lin.end(), 0.0);
        for (size_t e = 0; e < relaxed.size(); ++e)
            for (int t = 0; t < h; ++t) {
                const size_t i = e * static_cast<size_t>(h) + static_cast<size_t>(t);
                if (relaxed[e].mg_a == p)
                    lin[static_cast<size_t>(var_a[i])] = lambda[i];
                if (relaxed[e].mg_b == p)
                    lin[static_cast<size_t>(var_b[i])] = lambda[i];
            }
        local[static_cast<size_t>(p)].set_linear_cost(lin);
        SolveOptions o = inner;
        if (!warm[static_cast<size_t>(p)].empty()) o.warm_start = &warm[static_cast<size_t>(p)];
        DispatchSolution sol = local[static_cast<size_t>(p)].solve(o);
        if (sol.status == SolveStatus::infeasible)
            throw InfeasibleError("distributed coalition solve: microgrid member " +
                                  std::to_string(p) + " has an infeasible local problem");
        if (sol.status != SolveStatus::optimal && strict)
            throw SolverError("distributed coalition solve: local solve failed: " + sol.message);
        warm[static_cast<size_t>(p)] = sol.splitting_state;
        plans[static_cast<size_t>(p)] = std::move(sol);
    };

    // synchronous rounds: every member computes against round-r prices before
    // any round-r+1 update, so the local solves of one round can run
    // concurrently.  A persistent striped pool avoids per-round spawn costs;
    // the price update itself stays single-threaded in fixed edge order,
    // keeping runs bit-for-bit reproducible.
    const int workers =
        std::max(1, std::min(g, static_cast<int>(std::thread::hardware_concurrency())));
    std::atomic<bool> pool_stop{false};
    std::atomic<bool> round_strict{false};
    std::vector<std::exception_ptr> worker_error(static_cast<size_t>(workers));
    std::barrier<> round_start(workers + 1);
    std::barrier<> round_done(workers + 1);
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            const int lo = w * g / workers;
            const int hi = (w + 1) * g / workers;
            for (;;) {
                round_start.arrive_and_wait();
                if (pool_stop.load(std::memory_order_acquire)) return;
                try {
                    for (int p = lo; p < hi; ++p) solve_local(p, round_strict.load());
                } catch (...) {
                    worker_error[static_cast<size_t>(w)] = std::current_exception();
                }
                round_done.arrive_and_wait();
            }
        });
    struct PoolShutdown {
        std::atomic<bool>& stop;
        std::barrier<>& gate;
        bool released = false;
        void now() {
            if (released) return;
            released = true;
            stop.store(true, std::memory_order_release);
            gate.arrive_and_wait();
        }
        ~PoolShutdown() { now(); }
    } pool_shutdown{pool_stop, round_start};

    auto solve_round = [&](bool strict) {
        round_strict.store(strict);
        round_start.arrive_and_wait();
        round_done.arrive_and_wait();
        for (int w = 0; w < workers; ++w)
            if (worker_error[static_cast<size_t>(w)]) {
                std::exception_ptr err = worker_error[static_cast<size_t>(w)];
                pool_shutdown.now();
                std::rethrow_exception(err);
            }
    };

    auto reciprocity_residual = [&]() {
        double res = 0.0;
        for (size_t e = 0; e < relaxed.size(); ++e)
            for (int t = 0; t < h; ++t) {
                const size_t i = e * static_cast<size_t>(h) + static_cast<size_t>(t);
                const double mismatch =
                    plans[static_cast<size_t>(relaxed[e].mg_a)].z[static_cast<size_t>(var_a[i])] +
                    plans[static_cast<size_t>(relaxed[e].mg_b)].z[static_cast<size_t>(var_b[i])];
                res = std::max(res, std::fabs(mismatch));
            }
        return res;
    };

    for (int round = 0; round < opts.max_iters; ++round) {
        solve_round(false);
        result.iterations = round + 1;
        result.messages += sends_per_round;
        const double res = reciprocity_residual();
        result.price_residual = res;
        if (res <= opts.tol) {
            result.converged = true;
            break;
        }
        // divergence guard: a residual well above the best seen means the
        // fixed step overshoots on this geometry — halve it
        if (res > 1.25 * best_residual) {
            sigma *= 0.5;
            log::debug("dual ascent: residual %.3g regressed past best %.3g, sigma -> %.3g",
                       res, best_residual, sigma);
        }
        best_residual = std::min(best_residual, res);
        if ((round + 1) % 500 == 0)
            log::debug("dual ascent: round %d residual %.3e sigma %.3g", round + 1, res, sigma);
        for (size_t e = 0; e < relaxed.size(); ++e)
            for (int t = 0; t < h; ++t) {
                const size_t i = e * static_cast<size_t>(h) + static_cast<size_t>(t);
                const double mismatch =
                    plans[static_cast<size_t>(relaxed[e].mg_a)].z[static_cast<size_t>(var_a[i])] +
                    plans[static_cast<size_t>(relaxed[e].mg_b)].z[static_cast<size_t>(var_b[i])];
                lambda[i] += sigma * mismatch;
            }
    }
    if (relaxed.empty()) result.converged = true;

    // final pass at the converged prices with polishing, then stitch into the
    // coalition-problem layout
    solve_round(true);
    result.price_residual = reciprocity_residual();

    DispatchProblem cprob = build_coalition(net, coalition, k, h, soc_state);
    DispatchSolution stitched;
    stitched.z.assign(static_cast<size_t>(cprob.num_vars), 0.0);
    for (int p = 0; p < g; ++p) {
        const DispatchProblem& lp = local[static_cast<size_t>(p)].problem();
        const auto& z = plans[static_cast<size_t>(p)].z;
        for (int i = 0; i < lp.num_vars; ++i) {
            const VarInfo& v = lp.vars[static_cast<size_t>(i)];
            int target = -1;
            if (v.kind == VarKind::soc_state)
                target = cprob.soc_index(v.bus, v.step);
            else
                target = cprob.var_index(v.bus, v.step, v.kind, v.neighbor);
            stitched.z[static_cast<size_t>(target)] = z[static_cast<size_t>(i)];
        }
        stitched.iterations += plans[static_cast<size_t>(p)].iterations;
    }
    stitched.objective = cprob.objective(stitched.z);
    stitched.max_residual = cprob.max_violation(stitched.z);
    stitched.polished = true;
    stitched.status = result.converged ? SolveStatus::optimal : SolveStatus::iteration_limit;
    if (!result.converged)
        stitched.message = "dual ascent stopped at residual " +
                           std::to_string(result.price_residual) + " after " +
                           std::to_string(result.iterations) + " rounds";
    result.solution = std::move(stitched);
    return result;
}

} // namespace microdispatch
