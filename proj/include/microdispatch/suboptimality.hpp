// Suboptimality certificates for the coalition scheme: the stitched coalition
// cost J* always upper-bounds the plant-wide optimum J°, and the sum of the
// boundary-relaxed coalition problems J^b lower-bounds it, so
//
//   0 <= J* - J° <= J* - J^b
//
// and the right-hand side is computable without ever solving the plant-wide
// problem.
#pragma once

#include <cmath>
#include <string>

#include "microdispatch/errors.hpp"

namespace microdispatch {

// J* - J^b >= 0 (within solver tolerance); a clearly negative value means a
// solver or modeling bug, not a tight bound.
inline double suboptimality_bound(double j_star, double j_b) {
    const double bound = j_star - j_b;
    if (bound < -1e-6 * (1.0 + std::fabs(j_star)))
        throw SolverError("suboptimality bound is negative (" + std::to_string(bound) +
                          "): lower bound exceeds the coalition cost");
    return bound;
}

// J* - J° >= 0 (within solver tolerance)
inline double suboptimality_exact(double j_star, double j_opt) {
    const double gap = j_star - j_opt;
    if (gap < -1e-6 * (1.0 + std::fabs(j_star)))
        throw SolverError("suboptimality gap is negative (" + std::to_string(gap) +
                          "): coalition cost beats the plant-wide optimum");
    return gap;
}

} // namespace microdispatch
