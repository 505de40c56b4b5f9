#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "microdispatch/network.hpp"

namespace microdispatch {

// =====================================================================
// Horizon dispatch problem: a strictly convex diagonal QP over the
// decision variables of a set of buses across `horizon` steps.
//
// Per (bus, step) the decision block is
//     [u_st, u_g, u_m, v_(nb_1), ..., v_(nb_d)]
// i.e. 3 + deg(bus) variables: storage power, generation, main-grid
// import, and one directed transfer per incident edge (the neighbor list
// always covers all graph neighbors, including ones outside the problem's
// bus set — boundary transfers are then frozen, freed, or penalized
// according to the boundary policy). Blocks are bus-major, steps inside.
//
// State of charge enters through slack state variables appended after the
// decision variables (one per storage bus per step, zero cost weight,
// boxed to [soc_min, soc_max] and tied to u_st by dynamics equality rows).
// All published counts/listings are over the decision variables; the
// listing prints SoC limits in eliminated form over u_st.
// =====================================================================

enum class VarKind { storage, gen, import_grid, transfer, soc_state };

struct VarInfo {
    VarKind kind;
    BusId bus;
    int step;          // 0..horizon-1, relative to start_step
    BusId neighbor;    // transfer counterparty; -1 otherwise
};

enum class RowKind { balance, reciprocity, dynamics };

struct RowInfo {
    RowKind kind;
    BusId bus;      // balance/dynamics: the bus; reciprocity: lower edge endpoint
    BusId other;    // reciprocity: upper edge endpoint; else -1
    int step;       // 0..horizon-1
};

// Treatment of transfers on edges leaving the problem's bus set.
enum class BoundaryPolicy {
    frozen,     // v fixed to 0 — coalition problems exchange nothing outside
    free_flow,  // v free, Q-penalized only — lower-bound relaxation
    penalized,  // v free, Q plus extra-transfer penalty — efficiency subproblem
};

struct DispatchProblemOptions {
    BoundaryPolicy boundary = BoundaryPolicy::frozen;
    // Internal edges whose reciprocity rows are omitted because the coupling
    // is priced externally (distributed coalition solve). Pairs are (lo, hi).
    std::vector<std::pair<BusId, BusId>> relaxed_edges;
    // Outside buses toward which transfers stay free (plain Q weight)
    // regardless of `boundary` — the price-coupled sibling sets of a
    // distributed coalition solve. Must be sorted.
    std::vector<BusId> free_neighbors;
};

struct StorageBlock {
    BusId bus;
    double soc_init;    // state entering the first step
    double retention;   // a
    double rate;        // sampling_time / capacity (kW -> SoC fraction per step)
    double soc_min, soc_max;
};

struct DispatchProblem {
    int start_step = 0;
    int horizon = 1;
    std::vector<BusId> buses;  // sorted

    int num_decision_vars = 0;  // u and v variables only
    int num_vars = 0;           // including SoC slack states

    std::vector<VarInfo> vars;        // size num_vars
    std::vector<double> cost_weight;  // diagonal quadratic weights, >= 0
    std::vector<double> cost_linear;  // linear terms (dual-ascent prices)
    std::vector<double> lower, upper; // box bounds, +-inf allowed

    // equality constraints A z = rhs, CSR
    std::vector<int> row_ptr;  // size rows()+1
    std::vector<int> col_idx;
    std::vector<double> coeff;
    std::vector<double> rhs;
    std::vector<RowInfo> row_info;

    std::vector<StorageBlock> storage_blocks;

    DispatchProblemOptions options;

    // layout cache: per bus (in `buses` order) the full neighbor list and the
    // offset of the bus's first variable
    std::vector<std::vector<BusId>> bus_neighbors_;
    std::vector<int> bus_block_offset_;

    int rows() const { return static_cast<int>(rhs.size()); }

    // Position of a bus inside `buses`, or -1.
    int bus_position(BusId bus) const;

    // Index of a decision variable; throws std::out_of_range if absent.
    int var_index(BusId bus, int step, VarKind kind, BusId neighbor = -1) const;

    // Index of the SoC slack state of a storage bus at a step.
    int soc_index(BusId bus, int step) const;

    // sum_i w_i z_i^2 + q_i z_i
    double objective(const std::vector<double>& z) const;

    // max over |A z - rhs| and box violations
    double max_violation(const std::vector<double>& z) const;

    std::string var_name(int index) const;
    std::string row_name(int row) const;
};

// Problem over an arbitrary bus subset. soc_state holds the current state of
// charge per bus id (only storage-bus entries are read). Throws
// std::out_of_range if [start_step, start_step + horizon) leaves any profile.
DispatchProblem build_dispatch_problem(const NetworkModel& net,
                                       const std::vector<BusId>& buses,
                                       int start_step, int horizon,
                                       const std::vector<double>& soc_state,
                                       const DispatchProblemOptions& options);

// Plant-wide problem: every bus, reciprocity on every edge.
DispatchProblem build_centralized(const NetworkModel& net, int start_step,
                                  int horizon, const std::vector<double>& soc_state);

// Coalition problem: reciprocity inside, transfers leaving the coalition
// frozen to zero.
DispatchProblem build_coalition(const NetworkModel& net,
                                const std::vector<BusId>& coalition_buses,
                                int start_step, int horizon,
                                const std::vector<double>& soc_state);

// Lower-bound relaxation: like the coalition problem but transfers leaving
// the coalition are free (still Q-penalized). Summed over all coalitions this
// underestimates the plant-wide optimum.
DispatchProblem build_lower_bound(const NetworkModel& net,
                                  const std::vector<BusId>& coalition_buses,
                                  int start_step, int horizon,
                                  const std::vector<double>& soc_state);

// Map an initial SoC vector out of the network defaults (soc_init per bus).
std::vector<double> initial_soc(const NetworkModel& net);

// Plain-text canonical listing (variables, cost diagonal, constraint rows)
// for cross-checking against external solvers.
std::string dump_qp_listing(const DispatchProblem& prob);

} // namespace microdispatch
