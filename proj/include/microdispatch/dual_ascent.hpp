// Simulated distributed solve of a coalition dispatch problem: each member
// microgrid solves its own QP against transfer prices on the cross-microgrid
// edges, and the prices ascend on the reciprocity mismatch until the stitched
// plan balances.  Reproduces the communication pattern (rounds and message
// counts) of the distributed scheme while running in one process.
#pragma once

#include <vector>

#include "microdispatch/network.hpp"
#include "microdispatch/qp_solver.hpp"

namespace microdispatch {

struct DistributedSolveOptions {
    double tol = 1e-7;     // max |v_ab + v_ba| over relaxed edges, kW
    int max_iters = 50000; // price-update rounds
};

struct DistributedSolveResult {
    // stitched solution in the layout of build_coalition(net, coalition, ...)
    DispatchSolution solution;
    bool converged = false;
    int iterations = 0;       // price-update rounds performed
    long messages = 0;        // boundary-value exchanges between microgrids
    double price_residual = 0.0; // final max reciprocity mismatch (kW)
};

// Solve the coalition problem by dual decomposition across `microgrids`
// (disjoint bus sets covering the coalition; at least two of them — a
// singleton coalition is a plain local solve and rejects this path).
// Throws std::invalid_argument on a malformed decomposition and
// InfeasibleError when a member's local problem is infeasible.
DistributedSolveResult solve_coalition_distributed(
    const NetworkModel& net, const std::vector<std::vector<BusId>>& microgrids, int k, int h,
    const std::vector<double>& soc_state, const DistributedSolveOptions& opts = {});

} // namespace microdispatch
