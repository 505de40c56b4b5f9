#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "microdispatch/qp.hpp"

namespace microdispatch {

enum class SolveStatus { optimal, infeasible, iteration_limit };

struct SolveOptions {
    // Target bound on the returned point's max constraint violation
    // (equality rows and boxes, original units). Polishing usually lands
    // orders of magnitude below it.
    double tol = 1e-8;
    int max_iters = 200000;
    double gamma = 0.5;            // prox step of the splitting, scaled space
    double over_relaxation = 1.7;  // in (0, 2)
    bool polish = true;            // active-set KKT refinement on convergence
    // Splitting state from a previous solve of a structurally identical
    // problem (receding-horizon warm start). Ignored when the size mismatches.
    const std::vector<double>* warm_start = nullptr;
};

struct DispatchSolution {
    SolveStatus status = SolveStatus::iteration_limit;
    std::vector<double> z;  // all variables, original units (incl. SoC states)
    double objective = std::numeric_limits<double>::quiet_NaN();
    double max_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool polished = false;
    std::string message;
    std::vector<double> splitting_state;  // opaque warm-start payload
};

// A dispatch problem prepared for repeated solves: diagonal scaling applied,
// the projection onto the equality-constraint affine set factorized once.
// The linear cost term may be swapped between solves (dual-ascent prices);
// weights, bounds and the constraint matrix stay fixed.
class CompiledProblem {
public:
    explicit CompiledProblem(DispatchProblem prob);
    ~CompiledProblem();
    CompiledProblem(CompiledProblem&&) noexcept;
    CompiledProblem& operator=(CompiledProblem&&) noexcept;

    const DispatchProblem& problem() const;
    void set_linear_cost(const std::vector<double>& linear);

    DispatchSolution solve(const SolveOptions& opts = {}) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper.
DispatchSolution solve_qp(const DispatchProblem& prob, const SolveOptions& opts = {});

} // namespace microdispatch
