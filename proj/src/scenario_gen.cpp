#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <vector>

#include "microdispatch/rng.hpp"
#include "microdispatch/scenario.hpp"

namespace microdispatch {

namespace {

// raised-cosine weight over [start, end): 0 at the edges, 1 in the middle
double peak_weight(int k, int start, int end) {
    if (k < start || k >= end) return 0.0;
    const double u = (static_cast<double>(k - start) + 0.5) / static_cast<double>(end - start);
    const double s = std::sin(std::numbers::pi * u);
    return s * s;
}

} // namespace

Scenario generate_scenario(const GenParams& params) {
    const int n = params.buses;
    const int m = params.microgrids;
    if (n < 1 || m < 1 || m > n)
        throw std::invalid_argument("generate_scenario: need buses >= microgrids >= 1");
    if (params.steps < 1 || params.horizon < 1)
        throw std::invalid_argument("generate_scenario: need steps >= 1 and horizon >= 1");
    if (params.peak_scale < 0.0)
        throw std::invalid_argument("generate_scenario: peak_scale must be >= 0");

    SplitMix64 rng(mix_seed(params.seed, 0x5ce11a5u));
    Scenario sc;
    NetworkModel& net = sc.network;
    net.buses.resize(static_cast<size_t>(n));

    // random spanning tree (each bus attaches to an earlier one), plus a few
    // chords so transfers have alternative routes
    std::set<std::pair<BusId, BusId>> edge_set;
    for (int i = 1; i < n; ++i) {
        const int parent = static_cast<int>(rng.next_below(static_cast<uint64_t>(i)));
        edge_set.insert({parent, i});
    }
    for (int extra = n / 5; extra > 0; --extra) {
        const int a = static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
        const int b = static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
        if (a != b) edge_set.insert({std::min(a, b), std::max(a, b)});
    }
    net.edges.assign(edge_set.begin(), edge_set.end());
    finalize_topology(net);

    // initial partition: nearest-seed regions grown bus by bus stay connected
    std::vector<int> region(static_cast<size_t>(n), -1);
    std::vector<BusId> frontier;
    for (int p = 0; p < m; ++p) {
        BusId seed;
        do {
            seed = static_cast<BusId>(rng.next_below(static_cast<uint64_t>(n)));
        } while (region[static_cast<size_t>(seed)] != -1);
        region[static_cast<size_t>(seed)] = p;
        frontier.push_back(seed);
    }
    for (size_t head = 0; head < frontier.size(); ++head)
        for (BusId nb : net.neighbors(frontier[head]))
            if (region[static_cast<size_t>(nb)] == -1) {
                region[static_cast<size_t>(nb)] = region[static_cast<size_t>(frontier[head])];
                frontier.push_back(nb);
            }
    sc.initial_partition.members.assign(static_cast<size_t>(m), {});
    for (BusId b = 0; b < n; ++b)
        sc.initial_partition.members[static_cast<size_t>(region[static_cast<size_t>(b)])]
            .push_back(b);

    // day-shaped load profiles: slow sinusoid + per-sample noise, lifted by a
    // raised-cosine evening peak whose depth scales with peak_scale
    const int len = params.steps + params.horizon;
    const int peak_start = params.steps * 57 / 96;
    const int peak_end = params.steps * 80 / 96 + 1;
    for (BusId b = 0; b < n; ++b) {
        Bus& bus = net.buses[static_cast<size_t>(b)];
        bus.id = b;
        const double base = 4.0 + 16.0 * rng.next_unit();
        const double phase = 2.0 * std::numbers::pi * rng.next_unit();
        bus.load_forecast.resize(static_cast<size_t>(len));
        for (int k = 0; k < len; ++k) {
            const double day = 2.0 * std::numbers::pi * k / 96.0;
            double shape = 0.55 + 0.08 * std::sin(day + phase) +
                           0.04 * (rng.next_unit() - 0.5);
            shape *= 1.0 + 0.8 * params.peak_scale * peak_weight(k, peak_start, peak_end);
            bus.load_forecast[static_cast<size_t>(k)] = base * shape;
        }
        bus.uncertainty_bound = 0.02 * base;
        bus.cost_gen = rng.next_in(5.0, 15.0);
        bus.cost_import = rng.next_in(8.0, 20.0);
        bus.cost_storage = rng.next_in(1.0, 3.0);
        bus.cost_extra_transfer = rng.next_in(50.0, 200.0);
    }
    // the scenario schema carries one transfer weight per bus, applied to
    // every incident edge
    for (BusId b = 0; b < n; ++b) {
        const double q = rng.next_in(0.5, 2.0);
        for (BusId nb : net.neighbors(b))
            net.buses[static_cast<size_t>(b)].cost_transfer[nb] = q;
    }

    // the main grid connects at bus 0: any coalition reaching it can cover an
    // arbitrary deficit, so peak-time merges always end in a feasible problem
    net.buses[0].main_grid = true;

    // per microgrid: a generator at the region seed sized to cover the
    // region's worst off-peak demand with margin, and one storage unit
    for (int p = 0; p < m; ++p) {
        double worst = 0.0;
        for (int k = 0; k < len; ++k) {
            if (peak_weight(k, peak_start, peak_end) > 0.0) continue;
            double total = 0.0;
            for (BusId b : sc.initial_partition.members[static_cast<size_t>(p)])
                total += net.worst_case_load(b, k);
            worst = std::max(worst, total);
        }
        Bus& seed_bus = net.buses[static_cast<size_t>(frontier[static_cast<size_t>(p)])];
        seed_bus.gen_capacity = 1.15 * worst;

        StorageParams st;
        st.capacity = rng.next_in(50.0, 150.0);
        st.retention = 1.0;
        st.soc_min = 0.2;
        st.soc_max = 0.9;
        st.soc_init = rng.next_in(0.4, 0.7);
        st.charge_max = rng.next_in(5.0, 15.0);
        st.discharge_max = rng.next_in(5.0, 15.0);
        st.sampling_time = 0.25;
        seed_bus.storage = st;
    }

    sc.config.steps = params.steps;
    sc.config.horizon = params.horizon;
    sc.config.seed = params.seed;
    return sc;
}

} // namespace microdispatch
