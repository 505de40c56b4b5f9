// Results-directory writer: log.json carries the full simulation record
// (including wall-clock timings); the CSV files carry only deterministic
// quantities and are byte-stable across reruns of the same scenario.
#pragma once

#include <string>

#include "microdispatch/simulator.hpp"

namespace microdispatch {

// per-step costs: k,J_star,J_opt,J_lb,bound (benchmark columns blank when
// the run was not benchmarked)
std::string costs_csv(const SimulationLog& log);

// coalition membership: k,microgrid,coalition (ids per that step's partition)
std::string coalitions_csv(const SimulationLog& log);

// bus,microgrid snapshot of one step's partition
std::string partition_csv(const StepRecord& rec);

// the whole log as JSON (config, every StepRecord, timings)
std::string log_json(const SimulationLog& log);

// Write log.json, costs.csv, coalitions.csv and one partition_<k>.csv per
// step into `out_dir` (created if needed). Throws std::runtime_error on I/O
// failure.
void write_results(const SimulationLog& log, const std::string& out_dir);

} // namespace microdispatch
