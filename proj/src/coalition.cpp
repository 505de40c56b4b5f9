#include "microdispatch/coalition.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "microdispatch/imbalance.hpp"
#include "microdispatch/logging.hpp"

namespace microdispatch {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
} // namespace

double coalition_merge_cost(const NetworkModel& net, const std::vector<BusId>& c_p,
                            const std::vector<BusId>& c_q, int k, int h,
                            bool candidate_busy) {
    if (candidate_busy) return kInf;
    double cost = 0.0;
    for (int l = k; l < k + h; ++l) {
        const double merged = local_imbalance(net, c_p, l) + local_imbalance(net, c_q, l);
        cost += std::max(0.0, merged);
    }
    return cost;
}

int CoalitionStructure::coalition_of(MicrogridId p) const {
    for (int c = 0; c < coalition_count(); ++c)
        for (MicrogridId member : groups[static_cast<size_t>(c)])
            if (member == p) return c + 1;
    return 0;
}

std::vector<BusId> CoalitionStructure::buses(const Partition& part, int coalition) const {
    std::vector<BusId> out;
    for (MicrogridId p : groups[static_cast<size_t>(coalition - 1)]) {
        const auto& members = part.microgrid(p);
        out.insert(out.end(), members.begin(), members.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

void sort_groups(CoalitionStructure& cs) {
    for (auto& g : cs.groups) std::sort(g.begin(), g.end());
    std::sort(cs.groups.begin(), cs.groups.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

// coalition ids (1-based into cs.groups) whose buses touch coalition c's buses
std::vector<int> neighbour_coalitions(const NetworkModel& net, const Partition& part,
                                      const CoalitionStructure& cs, int c) {
    std::vector<int> owner_coalition(static_cast<size_t>(net.bus_count()), 0);
    for (int cc = 1; cc <= cs.coalition_count(); ++cc)
        for (BusId b : cs.buses(part, cc)) owner_coalition[static_cast<size_t>(b)] = cc;

    std::vector<int> out;
    for (BusId b : cs.buses(part, c))
        for (BusId nb : net.neighbors(b)) {
            const int cc = owner_coalition[static_cast<size_t>(nb)];
            if (cc != c && std::find(out.begin(), out.end(), cc) == out.end())
                out.push_back(cc);
        }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

CoalitionOutcome form_coalitions(const NetworkModel& net, const Partition& part, int k, int h) {
    const int m = part.microgrid_count();
    CoalitionOutcome out;
    out.structure.groups.reserve(static_cast<size_t>(m));
    for (MicrogridId p = 1; p <= m; ++p) out.structure.groups.push_back({p});

    for (int r = 0; r < m - 1; ++r) {
        CoalitionStructure& cs = out.structure;

        // snapshot of who exists entering this iteration, by smallest member id
        std::vector<MicrogridId> roster;
        for (const auto& g : cs.groups) roster.push_back(g.front());

        // engagement flag per coalition id: set once it has initiated, replied
        // a finite quote, or been absorbed this iteration
        std::vector<char> engaged(static_cast<size_t>(m + 1), 0);
        bool merged_any = false;

        for (MicrogridId id : roster) {
            const int c = cs.coalition_of(id);
            if (c == 0 || cs.groups[static_cast<size_t>(c - 1)].front() != id)
                continue; // absorbed earlier in this iteration
            if (engaged[static_cast<size_t>(id)]) continue;
            const std::vector<BusId> own = cs.buses(part, c);
            if (is_self_sufficient(net, own, k, h)) continue;
            const std::vector<int> neighbours = neighbour_coalitions(net, part, cs, c);
            if (neighbours.empty()) continue; // isolated: wait (grand coalition case)

            MergeEvent event;
            event.iteration = r;
            event.initiator = id;
            engaged[static_cast<size_t>(id)] = 1;
            out.messages += 2 * static_cast<long>(neighbours.size()); // requests + replies

            double best = kInf;
            int best_coalition = 0;
            for (int q : neighbours) {
                const MicrogridId qid = cs.groups[static_cast<size_t>(q - 1)].front();
                const bool busy = engaged[static_cast<size_t>(qid)] != 0;
                const double quote =
                    coalition_merge_cost(net, own, cs.buses(part, q), k, h, busy);
                if (!busy) engaged[static_cast<size_t>(qid)] = 1; // now in conversation
                event.candidates.push_back({qid, quote});
                if (quote < best) {
                    best = quote;
                    best_coalition = q;
                }
            }

            if (best_coalition != 0) {
                auto& target = cs.groups[static_cast<size_t>(best_coalition - 1)];
                const MicrogridId target_id = target.front();
                event.chosen = target_id;
                auto& source = cs.groups[static_cast<size_t>(c - 1)];
                target.insert(target.end(), source.begin(), source.end());
                std::sort(target.begin(), target.end());
                event.merged_members = target;
                cs.groups.erase(cs.groups.begin() + (c - 1));
                sort_groups(cs);
                merged_any = true;
                log::debug("coalition r=%d: %d merged with %d", r, id, target_id);
            }
            out.events.push_back(std::move(event));
        }

        out.iterations = r + 1;
        if (!merged_any) break; // nothing can change in later iterations either
        if (cs.coalition_count() == 1) break;
    }

    // Proposition-2 dichotomy; a violation is an implementation bug
    if (out.structure.coalition_count() > 1) {
        for (int c = 1; c <= out.structure.coalition_count(); ++c)
            if (!is_self_sufficient(net, out.structure.buses(part, c), k, h))
                throw std::logic_error(
                    "form_coalitions: terminated with a deficient non-grand coalition");
    }
    return out;
}

} // namespace microdispatch
