#include "microdispatch/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "microdispatch/errors.hpp"

namespace microdispatch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// membership lookup usable for both bus sets and edge sets
bool contains(const std::vector<BusId>& sorted, BusId b) {
    return std::binary_search(sorted.begin(), sorted.end(), b);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

int DispatchProblem::bus_position(BusId bus) const {
    auto it = std::lower_bound(buses.begin(), buses.end(), bus);
    if (it == buses.end() || *it != bus) return -1;
    return static_cast<int>(it - buses.begin());
}

int DispatchProblem::var_index(BusId bus, int step, VarKind kind, BusId neighbor) const {
    if (step < 0 || step >= horizon)
        throw std::out_of_range("var_index: step outside horizon");
    if (kind == VarKind::soc_state) return soc_index(bus, step);
    // decision blocks are laid out bus-major/step-inner; walk from the bus block
    int pos = bus_position(bus);
    if (pos < 0) throw std::out_of_range("var_index: bus not in problem");
    // find block start by scanning cumulative block sizes (cached in bus_offsets_)
    int offset = bus_block_offset_[pos];
    const int width = 3 + static_cast<int>(bus_neighbors_[pos].size());
    offset += step * width;
    switch (kind) {
        case VarKind::storage: return offset + 0;
        case VarKind::gen: return offset + 1;
        case VarKind::import_grid: return offset + 2;
        case VarKind::transfer: {
            const auto& nbs = bus_neighbors_[pos];
            auto it = std::lower_bound(nbs.begin(), nbs.end(), neighbor);
            if (it == nbs.end() || *it != neighbor)
                throw std::out_of_range("var_index: no edge to requested neighbor");
            return offset + 3 + static_cast<int>(it - nbs.begin());
        }
        default: break;
    }
    throw std::out_of_range("var_index: bad kind");
}

int DispatchProblem::soc_index(BusId bus, int step) const {
    for (std::size_t s = 0; s < storage_blocks.size(); ++s) {
        if (storage_blocks[s].bus == bus)
            return num_decision_vars + static_cast<int>(s) * horizon + step;
    }
    throw std::out_of_range("soc_index: bus has no storage");
}

double DispatchProblem::objective(const std::vector<double>& z) const {
    double acc = 0.0;
    for (int i = 0; i < num_vars; ++i)
        acc += cost_weight[i] * z[i] * z[i] + cost_linear[i] * z[i];
    return acc;
}

double DispatchProblem::max_violation(const std::vector<double>& z) const {
    double worst = 0.0;
    for (int r = 0; r < rows(); ++r) {
        double acc = -rhs[r];
        for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += coeff[p] * z[col_idx[p]];
        worst = std::max(worst, std::fabs(acc));
    }
    for (int i = 0; i < num_vars; ++i) {
        if (z[i] < lower[i]) worst = std::max(worst, lower[i] - z[i]);
        if (z[i] > upper[i]) worst = std::max(worst, z[i] - upper[i]);
    }
    return worst;
}

std::string DispatchProblem::var_name(int index) const {
    const VarInfo& v = vars[index];
    std::ostringstream os;
    switch (v.kind) {
        case VarKind::storage: os << "u_st[b" << v.bus << ",t" << v.step << "]"; break;
        case VarKind::gen: os << "u_g[b" << v.bus << ",t" << v.step << "]"; break;
        case VarKind::import_grid: os << "u_m[b" << v.bus << ",t" << v.step << "]"; break;
        case VarKind::transfer:
            os << "v[b" << v.bus << "->b" << v.neighbor << ",t" << v.step << "]";
            break;
        case VarKind::soc_state: os << "x[b" << v.bus << ",t" << v.step << "]"; break;
    }
    return os.str();
}

std::string DispatchProblem::row_name(int row) const {
    const RowInfo& r = row_info[row];
    std::ostringstream os;
    switch (r.kind) {
        case RowKind::balance: os << "balance[b" << r.bus << ",t" << r.step << "]"; break;
        case RowKind::reciprocity:
            os << "reciprocity[b" << r.bus << "~b" << r.other << ",t" << r.step << "]";
            break;
        case RowKind::dynamics: os << "dynamics[b" << r.bus << ",t" << r.step << "]"; break;
    }
    return os.str();
}

DispatchProblem build_dispatch_problem(const NetworkModel& net,
                                       const std::vector<BusId>& bus_set,
                                       int start_step, int horizon,
                                       const std::vector<double>& soc_state,
                                       const DispatchProblemOptions& options) {
    if (bus_set.empty()) throw std::invalid_argument("dispatch problem over empty bus set");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");

    DispatchProblem prob;
    prob.start_step = start_step;
    prob.horizon = horizon;
    prob.buses = bus_set;
    std::sort(prob.buses.begin(), prob.buses.end());
    prob.options = options;

    for (BusId b : prob.buses) {
        if (b < 0 || b >= net.bus_count())
            throw std::out_of_range("dispatch problem references unknown bus");
        const auto& profile = net.buses[b].load_forecast;
        if (start_step < 0 ||
            static_cast<std::size_t>(start_step + horizon) > profile.size())
            throw std::out_of_range("dispatch window leaves the load profile");
    }

    std::vector<std::pair<BusId, BusId>> relaxed = options.relaxed_edges;
    for (auto& [a, b] : relaxed)
        if (a > b) std::swap(a, b);
    std::sort(relaxed.begin(), relaxed.end());
    auto edge_relaxed = [&](BusId a, BusId b) {
        if (a > b) std::swap(a, b);
        return std::binary_search(relaxed.begin(), relaxed.end(), std::make_pair(a, b));
    };

    const double vbound = net.transfer_bound.value_or(kInf);

    // ---- layout ----
    prob.bus_neighbors_.resize(prob.buses.size());
    prob.bus_block_offset_.resize(prob.buses.size());
    int cursor = 0;
    for (std::size_t p = 0; p < prob.buses.size(); ++p) {
        const BusId b = prob.buses[p];
        prob.bus_neighbors_[p] = net.neighbors(b);  // sorted, includes outside buses
        prob.bus_block_offset_[p] = cursor;
        cursor += horizon * (3 + static_cast<int>(prob.bus_neighbors_[p].size()));
    }
    prob.num_decision_vars = cursor;
    for (BusId b : prob.buses) {
        if (net.buses[b].has_storage()) {
            const StorageParams& sp = *net.buses[b].storage;
            double x0 = (static_cast<std::size_t>(b) < soc_state.size()) ? soc_state[b]
                                                                         : sp.soc_init;
            prob.storage_blocks.push_back({b, x0, sp.retention,
                                           sp.sampling_time / sp.capacity, sp.soc_min,
                                           sp.soc_max});
        }
    }
    prob.num_vars =
        prob.num_decision_vars + static_cast<int>(prob.storage_blocks.size()) * horizon;

    prob.vars.resize(prob.num_vars);
    prob.cost_weight.assign(prob.num_vars, 0.0);
    prob.cost_linear.assign(prob.num_vars, 0.0);
    prob.lower.assign(prob.num_vars, -kInf);
    prob.upper.assign(prob.num_vars, kInf);

    // ---- decision variables: kinds, weights, boxes ----
    for (std::size_t p = 0; p < prob.buses.size(); ++p) {
        const BusId bid = prob.buses[p];
        const Bus& bus = net.buses[bid];
        const auto& nbs = prob.bus_neighbors_[p];
        for (int t = 0; t < horizon; ++t) {
            const int base = prob.bus_block_offset_[p] + t * (3 + static_cast<int>(nbs.size()));

            prob.vars[base + 0] = {VarKind::storage, bid, t, -1};
            prob.cost_weight[base + 0] = bus.cost_storage;
            if (bus.has_storage()) {
                prob.lower[base + 0] = -bus.storage->charge_max;
                prob.upper[base + 0] = bus.storage->discharge_max;
            } else {
                prob.lower[base + 0] = prob.upper[base + 0] = 0.0;
            }

            prob.vars[base + 1] = {VarKind::gen, bid, t, -1};
            prob.cost_weight[base + 1] = bus.cost_gen;
            prob.lower[base + 1] = 0.0;
            prob.upper[base + 1] = bus.gen_capacity;  // 0 for no generator

            prob.vars[base + 2] = {VarKind::import_grid, bid, t, -1};
            prob.cost_weight[base + 2] = bus.cost_import;
            prob.lower[base + 2] = 0.0;
            prob.upper[base + 2] = bus.main_grid ? kInf : 0.0;

            for (std::size_t s = 0; s < nbs.size(); ++s) {
                const BusId nb = nbs[s];
                const int vi = base + 3 + static_cast<int>(s);
                prob.vars[vi] = {VarKind::transfer, bid, t, nb};
                prob.cost_weight[vi] = bus.cost_transfer.at(nb);
                const bool internal = contains(prob.buses, nb);
                if (internal) {
                    prob.lower[vi] = -vbound;
                    prob.upper[vi] = vbound;
                } else if (contains(options.free_neighbors, nb)) {
                    // boundary toward a price-coupled sibling problem: free,
                    // plain Q weight; reciprocity is enforced by dual ascent
                    prob.lower[vi] = -vbound;
                    prob.upper[vi] = vbound;
                } else {
                    switch (options.boundary) {
                        case BoundaryPolicy::frozen:
                            prob.lower[vi] = prob.upper[vi] = 0.0;
                            break;
                        case BoundaryPolicy::free_flow:
                            prob.lower[vi] = -vbound;
                            prob.upper[vi] = vbound;
                            break;
                        case BoundaryPolicy::penalized:
                            prob.lower[vi] = -vbound;
                            prob.upper[vi] = vbound;
                            prob.cost_weight[vi] += bus.cost_extra_transfer;
                            break;
                    }
                }
            }
        }
    }

    // ---- SoC slack states ----
    for (std::size_t s = 0; s < prob.storage_blocks.size(); ++s) {
        const StorageBlock& sb = prob.storage_blocks[s];
        for (int t = 0; t < horizon; ++t) {
            const int vi = prob.num_decision_vars + static_cast<int>(s) * horizon + t;
            prob.vars[vi] = {VarKind::soc_state, sb.bus, t, -1};
            prob.lower[vi] = sb.soc_min;
            prob.upper[vi] = sb.soc_max;
        }
    }

    // ---- equality rows ----
    auto begin_row = [&](RowKind kind, BusId bus, BusId other, int step, double b) {
        prob.row_ptr.push_back(static_cast<int>(prob.col_idx.size()));
        prob.row_info.push_back({kind, bus, other, step});
        prob.rhs.push_back(b);
    };
    auto put = [&](int col, double c) {
        prob.col_idx.push_back(col);
        prob.coeff.push_back(c);
    };

    // balance: u_st + u_g + u_m + sum_nb v = worst-case load
    for (std::size_t p = 0; p < prob.buses.size(); ++p) {
        const BusId bid = prob.buses[p];
        const auto& nbs = prob.bus_neighbors_[p];
        const int width = 3 + static_cast<int>(nbs.size());
        for (int t = 0; t < horizon; ++t) {
            begin_row(RowKind::balance, bid, -1, t, net.worst_case_load(bid, start_step + t));
            const int base = prob.bus_block_offset_[p] + t * width;
            for (int s = 0; s < width; ++s) put(base + s, 1.0);
        }
    }

    // reciprocity: v_a->b + v_b->a = 0 on internal, non-relaxed edges
    for (const auto& [a, b] : net.edges) {
        if (!contains(prob.buses, a) || !contains(prob.buses, b)) continue;
        if (edge_relaxed(a, b)) continue;
        for (int t = 0; t < horizon; ++t) {
            begin_row(RowKind::reciprocity, a, b, t, 0.0);
            put(prob.var_index(a, t, VarKind::transfer, b), 1.0);
            put(prob.var_index(b, t, VarKind::transfer, a), 1.0);
        }
    }

    // dynamics: x_t - a x_{t-1} + rate * u_st_t = 0 (x_{-1} = soc entering)
    for (std::size_t s = 0; s < prob.storage_blocks.size(); ++s) {
        const StorageBlock& sb = prob.storage_blocks[s];
        for (int t = 0; t < horizon; ++t) {
            const int xi = prob.num_decision_vars + static_cast<int>(s) * horizon + t;
            begin_row(RowKind::dynamics, sb.bus, -1, t,
                      t == 0 ? sb.retention * sb.soc_init : 0.0);
            put(xi, 1.0);
            if (t > 0) put(xi - 1, -sb.retention);
            put(prob.var_index(sb.bus, t, VarKind::storage), sb.rate);
        }
    }
    prob.row_ptr.push_back(static_cast<int>(prob.col_idx.size()));

    return prob;
}

DispatchProblem build_centralized(const NetworkModel& net, int start_step, int horizon,
                                  const std::vector<double>& soc_state) {
    std::vector<BusId> all(net.bus_count());
    for (int i = 0; i < net.bus_count(); ++i) all[i] = i;
    DispatchProblemOptions opts;
    opts.boundary = BoundaryPolicy::frozen;  // no boundary exists
    return build_dispatch_problem(net, all, start_step, horizon, soc_state, opts);
}

DispatchProblem build_coalition(const NetworkModel& net,
                                const std::vector<BusId>& coalition_buses,
                                int start_step, int horizon,
                                const std::vector<double>& soc_state) {
    DispatchProblemOptions opts;
    opts.boundary = BoundaryPolicy::frozen;
    return build_dispatch_problem(net, coalition_buses, start_step, horizon, soc_state, opts);
}

DispatchProblem build_lower_bound(const NetworkModel& net,
                                  const std::vector<BusId>& coalition_buses,
                                  int start_step, int horizon,
                                  const std::vector<double>& soc_state) {
    DispatchProblemOptions opts;
    opts.boundary = BoundaryPolicy::free_flow;
    return build_dispatch_problem(net, coalition_buses, start_step, horizon, soc_state, opts);
}

std::vector<double> initial_soc(const NetworkModel& net) {
    std::vector<double> soc(net.bus_count(), 0.0);
    for (const Bus& b : net.buses)
        if (b.storage) soc[b.id] = b.storage->soc_init;
    return soc;
}

std::string dump_qp_listing(const DispatchProblem& prob) {
    std::ostringstream os;
    os << "qp-listing v1\n";
    os << "start_step " << prob.start_step << "  horizon " << prob.horizon << "  buses";
    for (BusId b : prob.buses) os << " " << b;
    os << "\n";
    os << "minimize sum_i weight_i * z_i^2 + linear_i * z_i\n";
    os << "variables " << prob.num_decision_vars << "\n";
    for (int i = 0; i < prob.num_decision_vars; ++i) {
        os << "  " << i << "  " << prob.var_name(i) << "  weight " << fmt(prob.cost_weight[i])
           << "  linear " << fmt(prob.cost_linear[i]) << "  bounds [" << fmt(prob.lower[i])
           << ", " << fmt(prob.upper[i]) << "]\n";
    }

    int eq_rows = 0;
    for (int r = 0; r < prob.rows(); ++r)
        if (prob.row_info[r].kind != RowKind::dynamics) ++eq_rows;
    os << "equality_constraints " << eq_rows << "\n";
    for (int r = 0; r < prob.rows(); ++r) {
        if (prob.row_info[r].kind == RowKind::dynamics) continue;
        os << "  " << prob.row_name(r) << ":";
        for (int p = prob.row_ptr[r]; p < prob.row_ptr[r + 1]; ++p) {
            const double c = prob.coeff[p];
            os << (c >= 0 ? " + " : " - ") << fmt(std::fabs(c)) << "*"
               << prob.var_name(prob.col_idx[p]);
        }
        os << " = " << fmt(prob.rhs[r]) << "\n";
    }

    // SoC limits in eliminated form: bounds on
    //   a^{t+1} x_init - rate * sum_{tau<=t} a^{t-tau} u_st[tau]
    os << "soc_constraints " << prob.storage_blocks.size() * prob.horizon << "\n";
    for (const StorageBlock& sb : prob.storage_blocks) {
        for (int t = 0; t < prob.horizon; ++t) {
            double x0_coeff = sb.soc_init;
            for (int i = 0; i <= t; ++i) x0_coeff *= sb.retention;
            os << "  soc[b" << sb.bus << ",t" << t << "]: " << fmt(sb.soc_min)
               << " <= " << fmt(x0_coeff);
            for (int tau = t; tau >= 0; --tau) {
                double c = sb.rate;
                for (int i = 0; i < t - tau; ++i) c *= sb.retention;
                os << " - " << fmt(c) << "*u_st[b" << sb.bus << ",t" << tau << "]";
            }
            os << " <= " << fmt(sb.soc_max) << "\n";
        }
    }
    return os.str();
}

} // namespace microdispatch
