// Command-line front end: run simulations, generate scenarios, validate
// inputs, and dump dispatch QPs in the canonical listing.
//
// Exit codes: 0 success, 1 usage, 2 input/validation problem, 3 infeasible
// dispatch, 4 solver failure.  Set MICRODISPATCH_LOG=info|debug for progress
// output on stderr.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "microdispatch/errors.hpp"
#include "microdispatch/qp.hpp"
#include "microdispatch/results_io.hpp"
#include "microdispatch/scenario.hpp"
#include "microdispatch/simulator.hpp"

namespace {

using namespace microdispatch;

struct ConfigOverrides {
    std::optional<int> steps, horizon, max_repartition_iters;
    std::optional<double> alpha, sampling_hours;
    std::optional<std::uint64_t> seed;
    bool benchmark = false;

    void apply(SimulationConfig& cfg) const {
        if (steps) cfg.steps = *steps;
        if (horizon) cfg.horizon = *horizon;
        if (alpha) cfg.alpha = *alpha;
        if (seed) cfg.seed = *seed;
        if (max_repartition_iters) cfg.max_repartition_iters = *max_repartition_iters;
        if (sampling_hours) cfg.sampling_hours = *sampling_hours;
        if (benchmark) cfg.benchmark = true;
    }
};

void add_override_flags(CLI::App& cmd, ConfigOverrides& ov) {
    cmd.add_option("--steps", ov.steps, "override simulated step count");
    cmd.add_option("--horizon", ov.horizon, "override prediction horizon");
    cmd.add_option("--alpha", ov.alpha, "override imbalance weight");
    cmd.add_option("--seed", ov.seed, "override disturbance/tie-break seed");
    cmd.add_option("--max-repartition-iters", ov.max_repartition_iters,
                   "override repartition iteration cap");
    cmd.add_option("--sampling-hours", ov.sampling_hours, "override sampling time (hours)");
    cmd.add_flag("--benchmark", ov.benchmark,
                 "also solve the centralized and lower-bound problems each step");
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            const ConfigOverrides& ov) {
    Scenario sc = load_scenario(scenario_path);
    ov.apply(sc.config);
    // re-validating after overrides: a longer run may outgrow the profiles
    Scenario checked = parse_scenario(serialize_scenario(sc));
    SimulationLog log = run_simulation(checked);
    write_results(log, out_dir);

    int repartitions = 0;
    double total_cost = 0.0;
    long messages = 0;
    for (const StepRecord& rec : log.steps) {
        repartitions += rec.triggered ? 1 : 0;
        total_cost += rec.cost_scheme;
        messages +=
            rec.messages_repartition + rec.messages_coalition + rec.messages_dual_ascent;
    }
    std::printf("simulated %zu steps: %d repartitions, %ld messages, total cost %.6g\n",
                log.steps.size(), repartitions, messages, total_cost);
    std::printf("results written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_gen(const GenParams& params, const std::string& out_path) {
    save_scenario(generate_scenario(params), out_path);
    std::printf("wrote %s (%d buses, %d microgrids, %d steps)\n", out_path.c_str(),
                params.buses, params.microgrids, params.steps);
    return 0;
}

int cmd_validate(const std::string& scenario_path) {
    Scenario sc = load_scenario(scenario_path);
    std::printf("%s: OK (%d buses, %d microgrids, %d steps, horizon %d)\n",
                scenario_path.c_str(), sc.network.bus_count(),
                sc.initial_partition.microgrid_count(), sc.config.steps, sc.config.horizon);
    return 0;
}

int cmd_dump_qp(const std::string& scenario_path, int step, std::vector<int> buses,
                const std::string& out_path) {
    Scenario sc = load_scenario(scenario_path);
    std::vector<BusId> coalition(buses.begin(), buses.end());
    if (coalition.empty()) {
        coalition.resize(static_cast<size_t>(sc.network.bus_count()));
        std::iota(coalition.begin(), coalition.end(), 0);
    }
    DispatchProblem prob = build_coalition(sc.network, coalition, step, sc.config.horizon,
                                           initial_soc(sc.network));
    const std::string listing = dump_qp_listing(prob);
    if (out_path.empty()) {
        std::fputs(listing.c_str(), stdout);
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
        out << listing;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"microgrid coalition dispatch simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_path;
    ConfigOverrides overrides;
    GenParams gen_params;
    int dump_step = 0;
    std::vector<int> dump_buses;

    CLI::App* run = app.add_subcommand("run", "simulate a scenario and write results");
    run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--out", out_path, "results directory")->default_val("results");
    add_override_flags(*run, overrides);

    CLI::App* gen = app.add_subcommand("gen", "generate a random scenario");
    gen->add_option("--buses", gen_params.buses, "number of buses")->required();
    gen->add_option("--microgrids", gen_params.microgrids, "number of microgrids")->required();
    gen->add_option("--seed", gen_params.seed, "generator seed");
    gen->add_option("--steps", gen_params.steps, "simulated steps");
    gen->add_option("--horizon", gen_params.horizon, "prediction horizon");
    gen->add_option("--peak-scale", gen_params.peak_scale,
                    "evening peak severity (0 = never deficient)");
    gen->add_option("--out", out_path, "output scenario file")->default_val("scenario.json");

    CLI::App* validate = app.add_subcommand("validate", "check a scenario file");
    validate->add_option("--scenario", scenario_path, "scenario JSON file")->required();

    CLI::App* dump = app.add_subcommand("dump-qp", "write a dispatch QP listing");
    dump->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    dump->add_option("--step", dump_step, "start step of the horizon window");
    dump->add_option("--buses", dump_buses, "coalition bus ids (default: all)")
        ->delimiter(',');
    dump->add_option("--out", out_path, "listing file (default: stdout)")->default_val("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (run->parsed()) return cmd_run(scenario_path, out_path, overrides);
        if (gen->parsed()) return cmd_gen(gen_params, out_path);
        if (validate->parsed()) return cmd_validate(scenario_path);
        if (dump->parsed()) return cmd_dump_qp(scenario_path, dump_step, dump_buses, out_path);
    } catch (const ScenarioError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const InfeasibleError& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 4;
    }
    return 1;
}
