#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "microdispatch/network.hpp"

namespace microdispatch {

struct SimulationConfig {
    int steps = 96;                   // simulated steps k = 0..steps-1
    int horizon = 8;                  // prediction horizon h
    double alpha = 1e4;               // imbalance weight in the partition cost
    std::uint64_t seed = 1;           // drives disturbances and tie-breaks
    int max_repartition_iters = 50;   // iteration cap for one repartitioning run
    double sampling_hours = 0.25;     // T_s, hours per step
    bool benchmark = false;           // also solve centralized + lower-bound problems

    bool operator==(const SimulationConfig&) const = default;
};

struct Scenario {
    NetworkModel network;
    Partition initial_partition;
    SimulationConfig config;

    bool operator==(const Scenario&) const = default;
};

// Parse and validate a scenario JSON document. Throws ScenarioError on
// malformed JSON, schema violations, disconnected networks, invalid initial
// partitions, or load profiles shorter than steps + horizon.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

// Serialize back to JSON. load(serialize(load(x))) == load(x).
std::string serialize_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::string& path);

// Random-scenario generator backing the `gen` CLI subcommand: a random
// connected network with a valid connected initial partition and day-shaped
// load profiles (sinusoid + noise), scaled so every microgrid is
// self-sufficient off-peak while the evening peak window creates deficits
// proportional to peak_scale.
struct GenParams {
    int buses = 10;
    int microgrids = 2;
    std::uint64_t seed = 1;
    int steps = 96;
    int horizon = 8;
    double peak_scale = 1.0;  // ~0: flat day, never deficient; >1: deep evening deficit
};

Scenario generate_scenario(const GenParams& params);

} // namespace microdispatch
