#include "microdispatch/imbalance.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace microdispatch {

double local_imbalance(const NetworkModel& net, const std::vector<BusId>& nodes, int step) {
    double delta = 0.0;
    for (BusId i : nodes) {
        const Bus& bus = net.buses[static_cast<size_t>(i)];
        if (step < 0 || step >= static_cast<int>(bus.load_forecast.size()))
            throw std::out_of_range("local_imbalance: step " + std::to_string(step) +
                                    " outside profile of bus " + std::to_string(i));
        delta += -bus.gen_capacity + bus.load_forecast[static_cast<size_t>(step)] +
                 bus.uncertainty_bound;
    }
    return delta;
}

ImbalanceReport imbalance_report(const NetworkModel& net, const std::vector<BusId>& nodes,
                                 int k, int h) {
    ImbalanceReport report;
    report.start_step = k;
    report.delta.reserve(static_cast<size_t>(h));
    for (int l = k; l < k + h; ++l) {
        const double d = local_imbalance(net, nodes, l);
        report.delta.push_back(d);
        report.cost += std::max(0.0, d);
        if (d > 0.0) report.self_sufficient = false;
    }
    return report;
}

bool is_self_sufficient(const NetworkModel& net, const std::vector<BusId>& nodes, int k, int h) {
    return imbalance_report(net, nodes, k, h).self_sufficient;
}

double imbalance_cost(const NetworkModel& net, const std::vector<BusId>& nodes, int k, int h) {
    return imbalance_report(net, nodes, k, h).cost;
}

} // namespace microdispatch
