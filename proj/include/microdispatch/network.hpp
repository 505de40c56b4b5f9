#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace microdispatch {

// Bus ids are dense 0..n-1 after a scenario is loaded.
using BusId = int;

// Microgrid ids are 1..m in every external artifact (CSV, logs, traces).
using MicrogridId = int;

// Storage device attached to a bus. Power convention: u_st > 0 discharges
// (injects into the bus), u_st < 0 charges. State of charge x is a fraction
// of capacity and evolves as x' = retention * x - (sampling_time / capacity) * u_st.
struct StorageParams {
    double capacity = 0.0;        // kWh
    double retention = 1.0;       // per-step self-discharge factor a, in (0, 1]
    double soc_min = 0.0;         // fraction of capacity
    double soc_max = 1.0;         // fraction of capacity
    double soc_init = 0.5;        // fraction of capacity
    double charge_max = 0.0;      // kW, bound on -u_st
    double discharge_max = 0.0;   // kW, bound on +u_st
    double sampling_time = 0.25;  // hours per simulation step

    bool operator==(const StorageParams&) const = default;
};

struct Bus {
    BusId id = 0;
    double gen_capacity = 0.0;  // kW; 0 means no dispatchable generator
    std::optional<StorageParams> storage;
    bool main_grid = false;     // bus can import from the upstream grid
    std::vector<double> load_forecast;  // kW per step, length >= steps + horizon
    double uncertainty_bound = 0.0;     // kW; |load error| <= this bound

    // Quadratic cost weights. Diagonal entries of R (storage, generation,
    // import) and of Q (one entry per incident edge, keyed by neighbor id),
    // plus the extra penalty applied to transfers leaving a microgrid in the
    // efficiency subproblem.
    double cost_storage = 1.0;
    double cost_gen = 10.0;
    double cost_import = 10.0;
    std::map<BusId, double> cost_transfer;  // Q_i diagonal, one entry per incident edge
    double cost_extra_transfer = 100.0;

    bool has_generator() const { return gen_capacity > 0.0; }
    bool has_storage() const { return storage.has_value(); }

    bool operator==(const Bus&) const = default;
};

// Undirected connected electrical network. Edges are stored as (lo, hi)
// pairs with lo < hi; adjacency lists are sorted.
struct NetworkModel {
    std::vector<Bus> buses;
    std::vector<std::pair<BusId, BusId>> edges;
    std::vector<std::vector<BusId>> adjacency;
    std::optional<double> transfer_bound; // |v| cap on every transfer; unset = unbounded

    int bus_count() const { return static_cast<int>(buses.size()); }
    const std::vector<BusId>& neighbors(BusId i) const { return adjacency[i]; }

    // Worst-case load at (bus, step): forecast plus the uncertainty bound.
    double worst_case_load(BusId i, int step) const {
        return buses[i].load_forecast[step] + buses[i].uncertainty_bound;
    }

    bool operator==(const NetworkModel&) const = default;
};

// Rebuilds adjacency from `edges`, normalizes edge order, and verifies the
// edge list references valid buses. Throws ScenarioError on bad input.
void finalize_topology(NetworkModel& net);

// True if the subgraph induced by `nodes` is connected (empty -> false).
bool induced_subgraph_connected(const NetworkModel& net,
                                const std::vector<BusId>& nodes);

// Partition of the bus set into m microgrids. members[p-1] is the sorted bus
// set of microgrid p (ids are 1-based externally).
struct Partition {
    std::vector<std::vector<BusId>> members;

    int microgrid_count() const { return static_cast<int>(members.size()); }
    const std::vector<BusId>& microgrid(MicrogridId p) const { return members[p - 1]; }
    std::vector<BusId>& microgrid(MicrogridId p) { return members[p - 1]; }

    // microgrid id containing the bus, or 0 if the bus is unassigned
    MicrogridId owner_of(BusId bus) const;

    bool operator==(const Partition&) const = default;
};

struct PartitionViolation {
    enum class Kind {
        unknown_bus,     // member id outside 0..n-1
        missing_bus,     // some bus not covered
        duplicate_bus,   // bus appears in two microgrids
        empty_microgrid,
        disconnected_microgrid,
    };
    Kind kind;
    MicrogridId microgrid = 0;  // offending microgrid where applicable
    BusId bus = -1;             // offending bus where applicable
    std::string message;
};

// Checks cover, disjointness, non-emptiness and connectivity, in that order,
// and reports the first violated invariant. nullopt means the partition is valid.
std::optional<PartitionViolation> validate_partition(const NetworkModel& net,
                                                     const Partition& partition);

// Deterministic realized-load disturbance stream: uniform in
// [-uncertainty_bound, +uncertainty_bound], a pure function of
// (seed, bus, step).
struct DisturbanceSampler {
    std::uint64_t seed = 0;
    double sample(const NetworkModel& net, BusId bus, int step) const;
};

} // namespace microdispatch
