// Closed-loop receding-horizon engine: per step, check the self-sufficiency
// trigger on the standing partition, repartition if it fires, rebuild
// coalitions from singletons, dispatch every coalition (locally or via the
// price-coordinated distributed solve), apply the first-step controls, and
// advance the storage states.  Optionally benchmarks every step against the
// plant-wide optimum and the lower-bound relaxation.
#pragma once

#include <map>
#include <optional>
#include <vector>

#include "microdispatch/coalition.hpp"
#include "microdispatch/network.hpp"
#include "microdispatch/repartition.hpp"
#include "microdispatch/scenario.hpp"

namespace microdispatch {

// first-step controls applied at one bus (kW, import/discharge positive)
struct AppliedControls {
    double storage = 0.0;
    double gen = 0.0;
    double import_grid = 0.0;
    std::map<BusId, double> transfers; // per neighbour
};

// wall-clock milliseconds per phase (diagnostic only; never in CSV outputs)
struct PhaseTimings {
    double repartition = 0.0; // includes the trigger check
    double coalition = 0.0;
    double dispatch = 0.0;
    double benchmark = 0.0;
};

struct StepRecord {
    int step = 0;

    // trigger + repartition phase
    bool triggered = false;
    std::vector<MicrogridId> deficient; // microgrids failing self-sufficiency at k
    RepartitionTrace repartition;       // meaningful only when triggered
    Partition partition;                // in force for this step

    // coalition phase
    CoalitionOutcome coalitions;

    // dispatch phase
    double cost_scheme = 0.0;          // J*: sum of coalition optima
    double stitched_residual = 0.0;    // plant-wide violation of the glued plan
    std::optional<double> cost_central; // J(centralized), benchmark only
    std::optional<double> cost_lower;   // J(lower bound), benchmark only
    std::optional<double> gap_bound;    // J* - J_lb
    std::optional<double> gap_exact;    // J* - J_central

    // applied controls and realized uncertainty, one entry per bus
    std::vector<AppliedControls> controls;
    std::vector<double> realized_disturbance; // w drawn for this step
    std::vector<double> reserve_slack;        // w_bar - w >= 0 (planned margin)
    std::vector<double> soc_after;            // state entering step k+1

    // communication, split by phase
    long messages_repartition = 0;
    long messages_coalition = 0;
    long messages_dual_ascent = 0;

    PhaseTimings timings;
};

struct SimulationLog {
    SimulationConfig config;
    std::vector<StepRecord> steps;
};

// Owns the evolving partition and storage state.  Steps must be taken in
// order; run() plays out whatever remains.  Dispatch infeasibility aborts the
// step with an InfeasibleError naming the coalition; a solver breakdown (or
// non-converged distributed solve) raises SolverError.
class Simulator {
public:
    explicit Simulator(Scenario scenario);

    StepRecord step();
    SimulationLog run();

    int steps_done() const { return next_step_; }
    const Scenario& scenario() const { return scenario_; }
    const Partition& partition() const { return partition_; }
    const std::vector<double>& soc() const { return soc_; }

private:
    Scenario scenario_;
    Partition partition_;
    std::vector<double> soc_; // one entry per bus; only storage buses move
    int next_step_ = 0;
    // receding-horizon warm starts, keyed by problem identity (tag, bus set)
    std::map<std::pair<int, std::vector<BusId>>, std::vector<double>> warm_;
};

// one-call convenience: construct and play every step
SimulationLog run_simulation(const Scenario& scenario);

} // namespace microdispatch
