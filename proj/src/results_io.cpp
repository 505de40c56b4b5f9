#include "microdispatch/results_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace microdispatch {

using nlohmann::json;

namespace {

// CSV number format: 9 significant digits, no trailing zero noise
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

json controls_to_json(const AppliedControls& ac) {
    json transfers = json::object();
    for (const auto& [nb, v] : ac.transfers) transfers[std::to_string(nb)] = v;
    return {{"storage", ac.storage},
            {"gen", ac.gen},
            {"import", ac.import_grid},
            {"transfers", std::move(transfers)}};
}

json trace_to_json_value(const RepartitionTrace& trace) {
    json iters = json::array();
    for (const RepartitionIteration& it : trace.iterations) {
        json receivers = json::array();
        for (const ReceiverEvaluation& r : it.receivers)
            receivers.push_back({{"microgrid", r.microgrid}, {"delta_total", r.delta_total}});
        iters.push_back({{"proposer", it.proposer},
                         {"node", it.node},
                         {"delta_local", it.delta_local},
                         {"receivers", std::move(receivers)},
                         {"chosen", it.chosen},
                         {"accepted", it.accepted},
                         {"cost_before", it.cost_before},
                         {"cost_after", it.cost_after}});
    }
    return {{"initial_cost", trace.initial_cost},
            {"final_cost", trace.final_cost},
            {"accepted_moves", trace.accepted_moves},
            {"iterations", std::move(iters)}};
}

json coalitions_to_json(const CoalitionOutcome& co) {
    json events = json::array();
    for (const MergeEvent& ev : co.events) {
        json candidates = json::array();
        for (const auto& [id, cost] : ev.candidates)
            candidates.push_back({{"coalition", id},
                                  {"cost", std::isinf(cost) ? json("busy") : json(cost)}});
        events.push_back({{"iteration", ev.iteration},
                          {"initiator", ev.initiator},
                          {"candidates", std::move(candidates)},
                          {"chosen", ev.chosen},
                          {"merged_members", ev.merged_members}});
    }
    return {{"groups", co.structure.groups},
            {"events", std::move(events)},
            {"messages", co.messages},
            {"iterations", co.iterations}};
}

json step_to_json(const StepRecord& rec) {
    json controls = json::array();
    for (const AppliedControls& ac : rec.controls) controls.push_back(controls_to_json(ac));
    json out{{"step", rec.step},
             {"triggered", rec.triggered},
             {"deficient", rec.deficient},
             {"partition", rec.partition.members},
             {"coalitions", coalitions_to_json(rec.coalitions)},
             {"cost_scheme", rec.cost_scheme},
             {"stitched_residual", rec.stitched_residual},
             {"controls", std::move(controls)},
             {"realized_disturbance", rec.realized_disturbance},
             {"reserve_slack", rec.reserve_slack},
             {"soc_after", rec.soc_after},
             {"messages",
              {{"repartition", rec.messages_repartition},
               {"coalition", rec.messages_coalition},
               {"dual_ascent", rec.messages_dual_ascent}}},
             {"timings_ms",
              {{"repartition", rec.timings.repartition},
               {"coalition", rec.timings.coalition},
               {"dispatch", rec.timings.dispatch},
               {"benchmark", rec.timings.benchmark}}}};
    if (rec.triggered) out["repartition"] = trace_to_json_value(rec.repartition);
    if (rec.cost_central) out["cost_central"] = *rec.cost_central;
    if (rec.cost_lower) out["cost_lower"] = *rec.cost_lower;
    if (rec.gap_bound) out["gap_bound"] = *rec.gap_bound;
    if (rec.gap_exact) out["gap_exact"] = *rec.gap_exact;
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

} // namespace

std::string costs_csv(const SimulationLog& log) {
    std::string out = "k,J_star,J_opt,J_lb,bound\n";
    for (const StepRecord& rec : log.steps) {
        out += std::to_string(rec.step) + "," + fmt(rec.cost_scheme) + ",";
        if (rec.cost_central) out += fmt(*rec.cost_central);
        out += ",";
        if (rec.cost_lower) out += fmt(*rec.cost_lower);
        out += ",";
        if (rec.gap_bound) out += fmt(*rec.gap_bound);
        out += "\n";
    }
    return out;
}

std::string coalitions_csv(const SimulationLog& log) {
    std::string out = "k,microgrid,coalition\n";
    for (const StepRecord& rec : log.steps)
        for (MicrogridId p = 1; p <= rec.partition.microgrid_count(); ++p)
            out += std::to_string(rec.step) + "," + std::to_string(p) + "," +
                   std::to_string(rec.coalitions.structure.coalition_of(p)) + "\n";
    return out;
}

std::string partition_csv(const StepRecord& rec) {
    std::string out = "bus,microgrid\n";
    std::vector<std::pair<BusId, MicrogridId>> rows;
    for (MicrogridId p = 1; p <= rec.partition.microgrid_count(); ++p)
        for (BusId b : rec.partition.microgrid(p)) rows.emplace_back(b, p);
    std::sort(rows.begin(), rows.end());
    for (const auto& [b, p] : rows)
        out += std::to_string(b) + "," + std::to_string(p) + "\n";
    return out;
}

std::string log_json(const SimulationLog& log) {
    json steps = json::array();
    for (const StepRecord& rec : log.steps) steps.push_back(step_to_json(rec));
    json doc{{"config",
              {{"steps", log.config.steps},
               {"horizon", log.config.horizon},
               {"alpha", log.config.alpha},
               {"seed", log.config.seed},
               {"max_repartition_iters", log.config.max_repartition_iters},
               {"sampling_hours", log.config.sampling_hours},
               {"benchmark", log.config.benchmark}}},
             {"steps", std::move(steps)}};
    return doc.dump(2) + "\n";
}

void write_results(const SimulationLog& log, const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "log.json", log_json(log));
    write_file(dir / "costs.csv", costs_csv(log));
    write_file(dir / "coalitions.csv", coalitions_csv(log));
    for (const StepRecord& rec : log.steps)
        write_file(dir / ("partition_" + std::to_string(rec.step) + ".csv"),
                   partition_csv(rec));
}

} // namespace microdispatch
