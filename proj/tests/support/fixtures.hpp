#pragma once

// Small programmatic network/scenario builders shared by the test suites.

#include <optional>
#include <vector>

#include "microdispatch/network.hpp"
#include "microdispatch/scenario.hpp"

namespace microdispatch::test_fixtures {

struct BusSpec {
    double gen = 0.0;
    bool main_grid = false;
    std::optional<StorageParams> storage;
    std::vector<double> loads;
    double uncertainty = 0.0;
    double c_storage = 1.0, c_gen = 10.0, c_import = 10.0;
    double c_transfer = 1.0, c_extra = 100.0;
};

inline NetworkModel make_net(const std::vector<BusSpec>& specs,
                             const std::vector<std::pair<int, int>>& edges) {
    NetworkModel net;
    net.buses.resize(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Bus& b = net.buses[i];
        b.id = static_cast<BusId>(i);
        b.gen_capacity = specs[i].gen;
        b.main_grid = specs[i].main_grid;
        b.storage = specs[i].storage;
        b.load_forecast = specs[i].loads;
        b.uncertainty_bound = specs[i].uncertainty;
        b.cost_storage = specs[i].c_storage;
        b.cost_gen = specs[i].c_gen;
        b.cost_import = specs[i].c_import;
        b.cost_extra_transfer = specs[i].c_extra;
    }
    for (const auto& [a, c] : edges) net.edges.emplace_back(a, c);
    finalize_topology(net);
    for (std::size_t i = 0; i < specs.size(); ++i)
        for (BusId nb : net.neighbors(static_cast<BusId>(i)))
            net.buses[i].cost_transfer[nb] = specs[i].c_transfer;
    return net;
}

inline std::vector<double> flat(double value, int len) {
    return std::vector<double>(len, value);
}

inline StorageParams small_storage() {
    StorageParams s;
    s.capacity = 1000.0;
    s.retention = 1.0;
    s.soc_min = 0.3;
    s.soc_max = 1.0;
    s.soc_init = 0.5;
    s.charge_max = 100.0;
    s.discharge_max = 100.0;
    s.sampling_time = 0.25;
    return s;
}

// The 4-bus path instance used across the partitioning tests: generator at
// bus 0 covering the whole path, the far side deficient.
inline NetworkModel four_bus_path(int profile_len = 12) {
    return make_net(
        {
            {.gen = 100.0, .loads = flat(0.0, profile_len)},
            {.loads = flat(10.0, profile_len)},
            {.loads = flat(60.0, profile_len)},
            {.loads = flat(10.0, profile_len)},
        },
        {{0, 1}, {1, 2}, {2, 3}});
}

} // namespace microdispatch::test_fixtures
