#include "microdispatch/network.hpp"

#include <algorithm>
#include <vector>

#include "microdispatch/errors.hpp"
#include "microdispatch/rng.hpp"

namespace microdispatch {

void finalize_topology(NetworkModel& net) {
    const int n = net.bus_count();
    for (auto& [a, b] : net.edges) {
        if (a == b) throw ScenarioError("self-loop edge at bus " + std::to_string(a));
        if (a < 0 || b < 0 || a >= n || b >= n)
            throw ScenarioError("edge references unknown bus (" + std::to_string(a) +
                                ", " + std::to_string(b) + ")");
        if (a > b) std::swap(a, b);
    }
    std::sort(net.edges.begin(), net.edges.end());
    const auto dup = std::adjacent_find(net.edges.begin(), net.edges.end());
    if (dup != net.edges.end())
        throw ScenarioError("duplicate edge (" + std::to_string(dup->first) + ", " +
                            std::to_string(dup->second) + ")");

    net.adjacency.assign(n, {});
    for (const auto& [a, b] : net.edges) {
        net.adjacency[a].push_back(b);
        net.adjacency[b].push_back(a);
    }
    for (auto& adj : net.adjacency) std::sort(adj.begin(), adj.end());
}

bool induced_subgraph_connected(const NetworkModel& net,
                                const std::vector<BusId>& nodes) {
    if (nodes.empty()) return false;
    std::vector<char> in_set(net.bus_count(), 0);
    for (BusId b : nodes) in_set[b] = 1;

    // iterative DFS from the first node, restricted to the induced subgraph
    std::vector<char> seen(net.bus_count(), 0);
    std::vector<BusId> stack{nodes.front()};
    seen[nodes.front()] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        BusId cur = stack.back();
        stack.pop_back();
        for (BusId nb : net.neighbors(cur)) {
            if (in_set[nb] && !seen[nb]) {
                seen[nb] = 1;
                ++reached;
                stack.push_back(nb);
            }
        }
    }
    return reached == nodes.size();
}

MicrogridId Partition::owner_of(BusId bus) const {
    for (std::size_t p = 0; p < members.size(); ++p) {
        for (BusId b : members[p]) {
            if (b == bus) return static_cast<MicrogridId>(p + 1);
        }
    }
    return 0;
}

std::optional<PartitionViolation> validate_partition(const NetworkModel& net,
                                                     const Partition& partition) {
    const int n = net.bus_count();
    std::vector<int> owner(n, 0);

    // cover + disjointness in one scan (unknown ids first: they can't be covered)
    for (int p = 0; p < partition.microgrid_count(); ++p) {
        for (BusId b : partition.members[p]) {
            if (b < 0 || b >= n) {
                return PartitionViolation{PartitionViolation::Kind::unknown_bus, p + 1, b,
                                          "microgrid " + std::to_string(p + 1) +
                                              " references unknown bus " + std::to_string(b)};
            }
            if (owner[b] != 0) {
                return PartitionViolation{PartitionViolation::Kind::duplicate_bus, p + 1, b,
                                          "bus " + std::to_string(b) + " assigned to microgrids " +
                                              std::to_string(owner[b]) + " and " +
                                              std::to_string(p + 1)};
            }
            owner[b] = p + 1;
        }
    }
    for (BusId b = 0; b < n; ++b) {
        if (owner[b] == 0) {
            return PartitionViolation{PartitionViolation::Kind::missing_bus, 0, b,
                                      "bus " + std::to_string(b) +
                                          " not assigned to any microgrid"};
        }
    }
    for (int p = 0; p < partition.microgrid_count(); ++p) {
        if (partition.members[p].empty()) {
            return PartitionViolation{PartitionViolation::Kind::empty_microgrid, p + 1, -1,
                                      "microgrid " + std::to_string(p + 1) + " is empty"};
        }
    }
    for (int p = 0; p < partition.microgrid_count(); ++p) {
        if (!induced_subgraph_connected(net, partition.members[p])) {
            return PartitionViolation{PartitionViolation::Kind::disconnected_microgrid,
                                      p + 1, -1,
                                      "microgrid " + std::to_string(p + 1) +
                                          " induces a disconnected subgraph"};
        }
    }
    return std::nullopt;
}

double DisturbanceSampler::sample(const NetworkModel& net, BusId bus, int step) const {
    const double bound = net.buses[bus].uncertainty_bound;
    if (bound <= 0.0) return 0.0;
    SplitMix64 g(mix_seed(seed, static_cast<std::uint64_t>(bus) + 0x517cc1b7UL,
                          static_cast<std::uint64_t>(step) + 0x27220a95UL));
    return g.next_in(-bound, bound);
}

} // namespace microdispatch
