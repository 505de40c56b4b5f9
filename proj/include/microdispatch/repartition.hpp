// Event-triggered repartitioning: when some microgrid cannot cover its own
// worst-case demand, microgrids trade boundary buses one at a time, each move
// accepted only if it lowers the combined partition cost
//
//   J_pi = alpha * (imbalance cost) + (efficiency cost)
//
// where the efficiency cost is the optimal value of the microgrid's local
// dispatch with boundary transfers left free but penalized.  The exchange is
// a local-improvement scheme: it terminates in a partition no single-node move
// can improve.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "microdispatch/imbalance.hpp"
#include "microdispatch/network.hpp"

namespace microdispatch {

// optimal value of the penalized local dispatch over `nodes` for the window
// [k, k+h).  `soc` carries the storage state entering step k (one entry per
// bus, as from initial_soc); pass nullptr for the scenario's initial state.
// Throws InfeasibleError/SolverError when the QP cannot be solved to optimality.
double efficiency_cost(const NetworkModel& net, const std::vector<BusId>& nodes, int k, int h,
                       const std::vector<double>* soc = nullptr);

// alpha * imbalance_cost + efficiency_cost
double partition_cost(const NetworkModel& net, const std::vector<BusId>& nodes, int k, int h,
                      double alpha, const std::vector<double>* soc = nullptr);

struct TriggerReport {
    bool triggered = false;                  // some microgrid is not self-sufficient
    std::vector<ImbalanceReport> microgrids; // indexed by microgrid id - 1
};

TriggerReport check_trigger(const NetworkModel& net, const Partition& part, int k, int h);

// boundary buses of microgrid p whose removal keeps the remainder connected
// and non-empty (candidates a proposer may offer away)
std::vector<BusId> movable_boundary_nodes(const NetworkModel& net, const Partition& part,
                                          MicrogridId p);

struct ReceiverEvaluation {
    MicrogridId microgrid = 0;
    double delta_total = 0.0; // expected change of the combined cost if it takes the node
};

struct RepartitionIteration {
    MicrogridId proposer = 0;
    BusId node = -1;        // bus offered away; -1 when the proposer had no candidate
    double delta_local = 0.0; // proposer-side cost change of giving the node up
    std::vector<ReceiverEvaluation> receivers;
    MicrogridId chosen = 0; // receiver with the best expected change; 0 if none
    bool accepted = false;
    double cost_before = 0.0; // combined cost entering this turn
    double cost_after = 0.0;  // combined cost leaving it (== before unless accepted)
};

struct RepartitionTrace {
    double initial_cost = 0.0;
    double final_cost = 0.0;
    int accepted_moves = 0;
    std::vector<RepartitionIteration> iterations;
};

struct RepartitionResult {
    Partition partition;
    RepartitionTrace trace;
};

// run the exchange from `initial` at step k.  One proposer per iteration in
// round-robin order starting from the lowest-id non-self-sufficient microgrid;
// stops after max_iters turns or one full cycle without an accepted move.
// Ties (candidate node, receiver) are broken uniformly with `seed`.
// Throws std::invalid_argument when max_iters < 1.
RepartitionResult repartition(const NetworkModel& net, const Partition& initial, int k, int h,
                              double alpha, int max_iters, std::uint64_t seed,
                              const std::vector<double>* soc = nullptr);

// audit form of a trace (JSON text)
std::string trace_to_json(const RepartitionTrace& trace);

} // namespace microdispatch
