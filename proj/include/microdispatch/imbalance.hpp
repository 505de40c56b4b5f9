// Local power imbalance of a bus set: installed generation against worst-case
// demand, evaluated per step over a prediction window.  A set that can cover
// its own worst-case demand at every step is self-sufficient and needs neither
// grid import nor help from other microgrids.
#pragma once

#include <vector>

#include "microdispatch/network.hpp"

namespace microdispatch {

struct ImbalanceReport {
    int start_step = 0;
    std::vector<double> delta;    // imbalance per step l = k .. k+h-1 (kW)
    double cost = 0.0;            // sum of positive parts over the window
    bool self_sufficient = true;  // delta <= 0 at every step
};

// sum_{i in nodes} (-gen_capacity_i + forecast_{i,step} + uncertainty_i);
// positive means the set cannot cover its own worst-case demand.
// Throws std::out_of_range when step exceeds the stored profiles.
double local_imbalance(const NetworkModel& net, const std::vector<BusId>& nodes, int step);

ImbalanceReport imbalance_report(const NetworkModel& net, const std::vector<BusId>& nodes,
                                 int k, int h);

bool is_self_sufficient(const NetworkModel& net, const std::vector<BusId>& nodes, int k, int h);

// sum_l max(0, imbalance at l) over the window
double imbalance_cost(const NetworkModel& net, const std::vector<BusId>& nodes, int k, int h);

} // namespace microdispatch
