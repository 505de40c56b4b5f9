#include "microdispatch/repartition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "microdispatch/errors.hpp"
#include "microdispatch/logging.hpp"
#include "microdispatch/qp.hpp"
#include "microdispatch/qp_solver.hpp"
#include "microdispatch/rng.hpp"

namespace microdispatch {

double efficiency_cost(const NetworkModel& net, const std::vector<BusId>& nodes, int k, int h,
                       const std::vector<double>* soc) {
    DispatchProblemOptions opts;
    opts.boundary = BoundaryPolicy::penalized;
    const std::vector<double> soc0 = soc ? *soc : initial_soc(net);
    DispatchProblem prob = build_dispatch_problem(net, nodes, k, h, soc0, opts);
    DispatchSolution sol = solve_qp(prob);
    if (sol.status == SolveStatus::infeasible)
        throw InfeasibleError("efficiency cost: local dispatch infeasible at step " +
                              std::to_string(k));
    if (sol.status != SolveStatus::optimal)
        throw SolverError("efficiency cost: " + sol.message);
    return sol.objective;
}

double partition_cost(const NetworkModel& net, const std::vector<BusId>& nodes, int k, int h,
                      double alpha, const std::vector<double>* soc) {
    return alpha * imbalance_cost(net, nodes, k, h) + efficiency_cost(net, nodes, k, h, soc);
}

TriggerReport check_trigger(const NetworkModel& net, const Partition& part, int k, int h) {
    TriggerReport report;
    report.microgrids.reserve(part.members.size());
    for (const auto& members : part.members) {
        report.microgrids.push_back(imbalance_report(net, members, k, h));
        if (!report.microgrids.back().self_sufficient) report.triggered = true;
    }
    return report;
}

std::vector<BusId> movable_boundary_nodes(const NetworkModel& net, const Partition& part,
                                          MicrogridId p) {
    const std::vector<BusId>& members = part.microgrid(p);
    std::vector<BusId> movable;
    if (members.size() <= 1) return movable; // emptying a microgrid is forbidden
    for (BusId i : members) {
        bool boundary = false;
        for (BusId j : net.neighbors(i))
            if (part.owner_of(j) != p) { boundary = true; break; }
        if (!boundary) continue;
        std::vector<BusId> rest;
        rest.reserve(members.size() - 1);
        for (BusId j : members)
            if (j != i) rest.push_back(j);
        if (induced_subgraph_connected(net, rest)) movable.push_back(i);
    }
    return movable;
}

namespace {

// memoizes partition costs within one repartitioning run so that re-offered
// sets (and the accepted move itself) reuse the exact value already computed
class CostCache {
public:
    CostCache(const NetworkModel& net, int k, int h, double alpha,
              const std::vector<double>* soc)
        : net_(net), k_(k), h_(h), alpha_(alpha), soc_(soc) {}

    double operator()(std::vector<BusId> nodes) {
        std::sort(nodes.begin(), nodes.end());
        auto it = memo_.find(nodes);
        if (it != memo_.end()) return it->second;
        const double cost = partition_cost(net_, nodes, k_, h_, alpha_, soc_);
        return memo_.emplace(std::move(nodes), cost).first->second;
    }

private:
    const NetworkModel& net_;
    int k_, h_;
    double alpha_;
    const std::vector<double>* soc_;
    std::map<std::vector<BusId>, double> memo_;
};

// uniform pick among indices whose value ties the minimum
template <typename Value>
int pick_min_index(const std::vector<Value>& values, SplitMix64& rng) {
    double best = values.front();
    for (double v : values) best = std::min(best, v);
    const double tol = 1e-12 * (1.0 + std::fabs(best));
    std::vector<int> tied;
    for (int i = 0; i < static_cast<int>(values.size()); ++i)
        if (values[static_cast<size_t>(i)] <= best + tol) tied.push_back(i);
    return tied[tied.size() == 1 ? 0 : static_cast<size_t>(rng.next_below(tied.size()))];
}

std::vector<BusId> without(const std::vector<BusId>& set, BusId node) {
    std::vector<BusId> out;
    out.reserve(set.size() - 1);
    for (BusId b : set)
        if (b != node) out.push_back(b);
    return out;
}

std::vector<BusId> with(const std::vector<BusId>& set, BusId node) {
    std::vector<BusId> out = set;
    out.insert(std::lower_bound(out.begin(), out.end(), node), node);
    return out;
}

} // namespace

RepartitionResult repartition(const NetworkModel& net, const Partition& initial, int k, int h,
                              double alpha, int max_iters, std::uint64_t seed,
                              const std::vector<double>* soc) {
    if (max_iters < 1) throw std::invalid_argument("repartition: max_iters must be >= 1");
    if (auto violation = validate_partition(net, initial))
        throw std::invalid_argument("repartition: invalid input partition: " +
                                    violation->message);

    RepartitionResult result;
    result.partition = initial;
    for (auto& members : result.partition.members) std::sort(members.begin(), members.end());

    const int m = result.partition.microgrid_count();
    CostCache cost(net, k, h, alpha, soc);
    SplitMix64 rng{mix_seed(seed, 0x8e51afu, static_cast<std::uint64_t>(k), 0x1db3u)};

    std::vector<double> mg_cost(static_cast<size_t>(m));
    for (MicrogridId p = 1; p <= m; ++p)
        mg_cost[static_cast<size_t>(p - 1)] = cost(result.partition.microgrid(p));
    double total = 0.0;
    for (double c : mg_cost) total += c;
    result.trace.initial_cost = total;

    // round-robin proposer, starting from the lowest-id deficient microgrid
    MicrogridId proposer = 1;
    for (MicrogridId p = 1; p <= m; ++p)
        if (!is_self_sufficient(net, result.partition.microgrid(p), k, h)) {
            proposer = p;
            break;
        }

    int idle_turns = 0; // consecutive proposer turns without an accepted move
    for (int r = 0; r < max_iters && idle_turns < m; ++r) {
        RepartitionIteration iter;
        iter.proposer = proposer;
        iter.cost_before = total;

        const std::vector<BusId> candidates =
            movable_boundary_nodes(net, result.partition, proposer);
        if (!candidates.empty()) {
            // the node the proposer is happiest to lose: argmin of the cost
            // the remainder would have without it
            std::vector<double> residual_cost;
            residual_cost.reserve(candidates.size());
            for (BusId theta : candidates)
                residual_cost.push_back(cost(without(result.partition.microgrid(proposer), theta)));
            const int pick = pick_min_index(residual_cost, rng);
            const BusId theta = candidates[static_cast<size_t>(pick)];
            iter.node = theta;
            iter.delta_local = residual_cost[static_cast<size_t>(pick)] -
                               mg_cost[static_cast<size_t>(proposer - 1)];

            // neighbouring microgrids evaluate taking the node
            std::vector<MicrogridId> receivers;
            for (BusId j : net.neighbors(theta)) {
                const MicrogridId q = result.partition.owner_of(j);
                if (q != proposer && std::find(receivers.begin(), receivers.end(), q) ==
                                         receivers.end())
                    receivers.push_back(q);
            }
            std::sort(receivers.begin(), receivers.end());

            std::vector<double> delta_totals;
            std::vector<double> grown_cost;
            for (MicrogridId q : receivers) {
                const double grown = cost(with(result.partition.microgrid(q), theta));
                grown_cost.push_back(grown);
                const double delta =
                    grown - mg_cost[static_cast<size_t>(q - 1)] + iter.delta_local;
                delta_totals.push_back(delta);
                iter.receivers.push_back({q, delta});
            }

            if (!receivers.empty()) {
                const int best = pick_min_index(delta_totals, rng);
                const MicrogridId q_star = receivers[static_cast<size_t>(best)];
                iter.chosen = q_star;
                if (delta_totals[static_cast<size_t>(best)] <= 0.0) {
                    // accept: hand theta over and reuse the evaluated costs
                    auto& from = result.partition.microgrid(proposer);
                    from.erase(std::find(from.begin(), from.end(), theta));
                    auto& to = result.partition.microgrid(q_star);
                    to.insert(std::lower_bound(to.begin(), to.end(), theta), theta);

                    mg_cost[static_cast<size_t>(proposer - 1)] =
                        residual_cost[static_cast<size_t>(pick)];
                    mg_cost[static_cast<size_t>(q_star - 1)] =
                        grown_cost[static_cast<size_t>(best)];
                    total += delta_totals[static_cast<size_t>(best)];
                    iter.accepted = true;
                    ++result.trace.accepted_moves;

                    if (auto violation = validate_partition(net, result.partition))
                        throw std::logic_error("repartition: move broke the partition: " +
                                               violation->message);
                    log::debug("repartition r=%d: bus %d moved %d -> %d (delta %.6g)", r,
                               theta, proposer, q_star,
                               delta_totals[static_cast<size_t>(best)]);
                }
            }
        }

        idle_turns = iter.accepted ? 0 : idle_turns + 1;
        iter.cost_after = total;
        result.trace.iterations.push_back(std::move(iter));
        proposer = (proposer % m) + 1;
    }

    result.trace.final_cost = total;
    return result;
}

std::string trace_to_json(const RepartitionTrace& trace) {
    nlohmann::json doc;
    doc["initial_cost"] = trace.initial_cost;
    doc["final_cost"] = trace.final_cost;
    doc["accepted_moves"] = trace.accepted_moves;
    doc["iterations"] = nlohmann::json::array();
    for (const RepartitionIteration& it : trace.iterations) {
        nlohmann::json row;
        row["proposer"] = it.proposer;
        row["node"] = it.node;
        row["delta_local"] = it.delta_local;
        row["chosen"] = it.chosen;
        row["accepted"] = it.accepted;
        row["cost_before"] = it.cost_before;
        row["cost_after"] = it.cost_after;
        row["receivers"] = nlohmann::json::array();
        for (const ReceiverEvaluation& rec : it.receivers)
            row["receivers"].push_back(
                {{"microgrid", rec.microgrid}, {"delta_total", rec.delta_total}});
        doc["iterations"].push_back(std::move(row));
    }
    return doc.dump(2) + "\n";
}

} // namespace microdispatch
