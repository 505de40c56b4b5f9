// Coalition formation on top of a fixed partition: microgrids that cannot
// cover their own worst-case demand pair up with neighbours, iteratively,
// until every coalition is self-sufficient or everything has merged into the
// grand coalition.  Coalitions are rebuilt from singletons each dispatch step.
#pragma once

#include <utility>
#include <vector>

#include "microdispatch/network.hpp"

namespace microdispatch {

// merged imbalance cost: sum_l max(0, delta_p(l) + delta_q(l)) over the
// window.  `candidate_busy` models the refusal reply of a coalition already
// engaged in another merger this iteration: +infinity.
double coalition_merge_cost(const NetworkModel& net, const std::vector<BusId>& c_p,
                            const std::vector<BusId>& c_q, int k, int h,
                            bool candidate_busy = false);

struct CoalitionStructure {
    // one entry per coalition: sorted microgrid ids, ordered by smallest member
    std::vector<std::vector<MicrogridId>> groups;

    int coalition_count() const { return static_cast<int>(groups.size()); }

    // 1-based coalition id of a microgrid (by position in `groups`), or 0
    int coalition_of(MicrogridId p) const;

    // union of the member microgrids' buses, sorted
    std::vector<BusId> buses(const Partition& part, int coalition) const;

    bool operator==(const CoalitionStructure&) const = default;
};

struct MergeEvent {
    int iteration = 0;          // r
    MicrogridId initiator = 0;  // coalition named by its smallest microgrid id
    // candidate coalition (smallest-member id) -> quoted merge cost (inf = busy)
    std::vector<std::pair<MicrogridId, double>> candidates;
    MicrogridId chosen = 0;     // 0 when every reply was infinite
    std::vector<MicrogridId> merged_members; // D set after the merge
};

struct CoalitionOutcome {
    CoalitionStructure structure;
    std::vector<MergeEvent> events;
    long messages = 0;   // requests + replies across all initiations
    int iterations = 0;  // iterations actually run (<= m-1)
};

// Run the merger protocol at step k. Initiators are the non-self-sufficient
// coalitions with at least one neighbouring coalition, processed in ascending
// id order; a coalition engages in at most one conversation per iteration.
// Postcondition (checked): every coalition self-sufficient, or one grand
// coalition.
CoalitionOutcome form_coalitions(const NetworkModel& net, const Partition& part, int k, int h);

} // namespace microdispatch
