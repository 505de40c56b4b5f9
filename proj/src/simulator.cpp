#include "microdispatch/simulator.hpp"

#include <chrono>
#include <stdexcept>
#include <string>
#include <utility>

#include "microdispatch/dual_ascent.hpp"
#include "microdispatch/errors.hpp"
#include "microdispatch/logging.hpp"
#include "microdispatch/qp.hpp"
#include "microdispatch/qp_solver.hpp"
#include "microdispatch/suboptimality.hpp"

namespace microdispatch {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point from) {
    return std::chrono::duration<double, std::milli>(Clock::now() - from).count();
}

std::string bus_list(const std::vector<BusId>& buses) {
    std::string out = "{";
    for (size_t i = 0; i < buses.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(buses[i]);
    }
    return out + "}";
}

// warm-start cache tags (part of the key: identical bus sets may appear as a
// coalition, the whole plant, and a relaxation, with different layouts)
constexpr int kTagCoalition = 0;
constexpr int kTagCentral = 1;
constexpr int kTagLowerBound = 2;

} // namespace

Simulator::Simulator(Scenario scenario)
    : scenario_(std::move(scenario)),
      partition_(scenario_.initial_partition),
      soc_(initial_soc(scenario_.network)) {
    if (auto bad = validate_partition(scenario_.network, partition_))
        throw ScenarioError("simulator: initial partition invalid: " + bad->message);
}

StepRecord Simulator::step() {
    const NetworkModel& net = scenario_.network;
    const SimulationConfig& cfg = scenario_.config;
    const int k = next_step_;
    const int h = cfg.horizon;
    if (k >= cfg.steps) throw std::logic_error("simulator: stepping past the configured end");

    StepRecord rec;
    rec.step = k;

    // --- trigger + repartition ------------------------------------------
    auto t0 = Clock::now();
    TriggerReport trig = check_trigger(net, partition_, k, h);
    rec.triggered = trig.triggered;
    for (size_t i = 0; i < trig.microgrids.size(); ++i)
        if (!trig.microgrids[i].self_sufficient)
            rec.deficient.push_back(static_cast<MicrogridId>(i + 1));
    if (trig.triggered) {
        RepartitionResult rr = repartition(net, partition_, k, h, cfg.alpha,
                                           cfg.max_repartition_iters, cfg.seed, &soc_);
        partition_ = std::move(rr.partition);
        for (const RepartitionIteration& it : rr.trace.iterations)
            if (it.node != -1)
                rec.messages_repartition += 2 * static_cast<long>(it.receivers.size());
        rec.repartition = std::move(rr.trace);
        log::info("step %d: repartitioned into %d microgrids (%d moves)", k,
                  partition_.microgrid_count(), rec.repartition.accepted_moves);
    }
    rec.partition = partition_;
    rec.timings.repartition = ms_since(t0);

    // --- coalition formation ---------------------------------------------
    t0 = Clock::now();
    rec.coalitions = form_coalitions(net, partition_, k, h);
    rec.messages_coalition = rec.coalitions.messages;
    rec.timings.coalition = ms_since(t0);

    // --- dispatch ---------------------------------------------------------
    t0 = Clock::now();
    // full-plant problem: layout for stitching, residual check, benchmark
    DispatchProblem full = build_centralized(net, k, h, soc_);
    std::vector<double> stitched(static_cast<size_t>(full.num_vars), 0.0);
    rec.cost_scheme = 0.0;

    const CoalitionStructure& cs = rec.coalitions.structure;
    for (int c = 1; c <= cs.coalition_count(); ++c) {
        const std::vector<BusId> buses = cs.buses(partition_, c);
        const std::vector<MicrogridId>& members = cs.groups[static_cast<size_t>(c - 1)];

        DispatchProblem prob = build_coalition(net, buses, k, h, soc_);
        DispatchSolution sol;
        if (members.size() == 1) {
            // single microgrid: one local solve, no communication
            SolveOptions opts;
            auto key = std::make_pair(kTagCoalition, buses);
            auto hit = warm_.find(key);
            if (hit != warm_.end()) opts.warm_start = &hit->second;
            sol = solve_qp(prob, opts);
            if (sol.status == SolveStatus::optimal) warm_[key] = sol.splitting_state;
        } else {
            std::vector<std::vector<BusId>> mg_buses;
            mg_buses.reserve(members.size());
            for (MicrogridId p : members) mg_buses.push_back(partition_.microgrid(p));
            DistributedSolveResult dres =
                solve_coalition_distributed(net, mg_buses, k, h, soc_);
            rec.messages_dual_ascent += dres.messages;
            if (!dres.converged)
                throw SolverError("step " + std::to_string(k) + ", coalition " +
                                  bus_list(buses) + ": " + dres.solution.message);
            sol = std::move(dres.solution);
        }
        if (sol.status == SolveStatus::infeasible)
            throw InfeasibleError("step " + std::to_string(k) + ", coalition " +
                                  bus_list(buses) +
                                  ": local problem infeasible — the coalition cannot cover "
                                  "its worst-case demand: " +
                                  sol.message);
        if (sol.status != SolveStatus::optimal)
            throw SolverError("step " + std::to_string(k) + ", coalition " + bus_list(buses) +
                              ": " + sol.message);

        rec.cost_scheme += sol.objective;
        for (int i = 0; i < prob.num_vars; ++i) {
            const VarInfo& v = prob.vars[static_cast<size_t>(i)];
            const int at = (v.kind == VarKind::soc_state)
                               ? full.soc_index(v.bus, v.step)
                               : full.var_index(v.bus, v.step, v.kind, v.neighbor);
            stitched[static_cast<size_t>(at)] = sol.z[static_cast<size_t>(i)];
        }
    }
    rec.stitched_residual = full.max_violation(stitched);
    rec.timings.dispatch = ms_since(t0);

    // --- benchmark (optional) ----------------------------------------------
    if (cfg.benchmark) {
        t0 = Clock::now();
        auto solve_cached = [&](int tag, const std::vector<BusId>& key_buses,
                                const DispatchProblem& prob, const char* what) {
            SolveOptions opts;
            auto key = std::make_pair(tag, key_buses);
            auto hit = warm_.find(key);
            if (hit != warm_.end()) opts.warm_start = &hit->second;
            DispatchSolution sol = solve_qp(prob, opts);
            if (sol.status == SolveStatus::infeasible)
                throw InfeasibleError("step " + std::to_string(k) + ": " + what +
                                      " infeasible: " + sol.message);
            if (sol.status != SolveStatus::optimal)
                throw SolverError("step " + std::to_string(k) + ": " + what + ": " +
                                  sol.message);
            warm_[key] = sol.splitting_state;
            return sol.objective;
        };
        rec.cost_central =
            solve_cached(kTagCentral, {}, full, "centralized benchmark");
        double lb = 0.0;
        for (int c = 1; c <= cs.coalition_count(); ++c) {
            const std::vector<BusId> buses = cs.buses(partition_, c);
            lb += solve_cached(kTagLowerBound, buses,
                               build_lower_bound(net, buses, k, h, soc_),
                               "lower-bound relaxation");
        }
        rec.cost_lower = lb;
        rec.gap_bound = suboptimality_bound(rec.cost_scheme, lb);
        rec.gap_exact = suboptimality_exact(rec.cost_scheme, *rec.cost_central);
        rec.timings.benchmark = ms_since(t0);
    }

    // --- apply first-step controls, draw uncertainty, advance storage ------
    const int n = net.bus_count();
    rec.controls.resize(static_cast<size_t>(n));
    rec.realized_disturbance.resize(static_cast<size_t>(n));
    rec.reserve_slack.resize(static_cast<size_t>(n));
    DisturbanceSampler sampler{cfg.seed};
    for (BusId b = 0; b < n; ++b) {
        AppliedControls& ac = rec.controls[static_cast<size_t>(b)];
        ac.storage = stitched[static_cast<size_t>(full.var_index(b, 0, VarKind::storage))];
        ac.gen = stitched[static_cast<size_t>(full.var_index(b, 0, VarKind::gen))];
        ac.import_grid =
            stitched[static_cast<size_t>(full.var_index(b, 0, VarKind::import_grid))];
        for (BusId nb : net.neighbors(b))
            ac.transfers[nb] =
                stitched[static_cast<size_t>(full.var_index(b, 0, VarKind::transfer, nb))];

        const double w = sampler.sample(net, b, k);
        rec.realized_disturbance[static_cast<size_t>(b)] = w;
        // dispatch planned against forecast + bound; the unused margin is the
        // reserve the plan carries against this realization
        rec.reserve_slack[static_cast<size_t>(b)] =
            net.buses[static_cast<size_t>(b)].uncertainty_bound - w;

        if (net.buses[static_cast<size_t>(b)].storage) {
            const StorageParams& sp = *net.buses[static_cast<size_t>(b)].storage;
            soc_[static_cast<size_t>(b)] = sp.retention * soc_[static_cast<size_t>(b)] -
                                           sp.sampling_time / sp.capacity * ac.storage;
        }
    }
    rec.soc_after = soc_;

    ++next_step_;
    return rec;
}

SimulationLog Simulator::run() {
    SimulationLog out;
    out.config = scenario_.config;
    out.steps.reserve(static_cast<size_t>(scenario_.config.steps - next_step_));
    while (next_step_ < scenario_.config.steps) out.steps.push_back(step());
    return out;
}

SimulationLog run_simulation(const Scenario& scenario) { return Simulator(scenario).run(); }

} // namespace microdispatch
