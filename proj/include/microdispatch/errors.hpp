#pragma once

#include <stdexcept>
#include <string>

namespace microdispatch {

// Scenario/input problems: malformed JSON, schema violations, disconnected
// networks, invalid partitions, profiles too short. CLI maps these to exit 2.
class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

// A dispatch problem whose constraint set is empty (e.g. load exceeds every
// power source reachable by the coalition). CLI maps these to exit 3.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// The solver failed to converge or produced an inconsistent certificate.
// CLI maps these to exit 4.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace microdispatch
