#include "microdispatch/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "microdispatch/errors.hpp"

namespace microdispatch {

using nlohmann::json;

namespace {

double require_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_number())
        throw ScenarioError(where + ": missing or non-numeric field '" + key + "'");
    return obj[key].get<double>();
}

double number_or(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number())
        throw ScenarioError(std::string("field '") + key + "' must be a number");
    return obj[key].get<double>();
}

StorageParams parse_storage(const json& st, const std::string& where) {
    StorageParams s;
    s.capacity = require_number(st, "capacity", where);
    s.retention = number_or(st, "retention", 1.0);
    s.soc_min = require_number(st, "soc_min", where);
    s.soc_max = require_number(st, "soc_max", where);
    s.soc_init = require_number(st, "soc_init", where);
    s.charge_max = require_number(st, "charge_max", where);
    s.discharge_max = require_number(st, "discharge_max", where);
    if (s.capacity <= 0.0) throw ScenarioError(where + ": storage capacity must be > 0");
    if (s.retention <= 0.0 || s.retention > 1.0)
        throw ScenarioError(where + ": storage retention must be in (0, 1]");
    if (!(s.soc_min <= s.soc_init && s.soc_init <= s.soc_max))
        throw ScenarioError(where + ": need soc_min <= soc_init <= soc_max");
    if (s.charge_max < 0.0 || s.discharge_max < 0.0)
        throw ScenarioError(where + ": storage power limits must be >= 0");
    return s;
}

} // namespace

Scenario parse_scenario(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& err) {
        throw ScenarioError(std::string("scenario JSON parse error: ") + err.what());
    }
    if (!doc.is_object()) throw ScenarioError("scenario root must be a JSON object");
    for (const char* key : {"buses", "edges", "initial_partition", "config"}) {
        if (!doc.contains(key))
            throw ScenarioError(std::string("scenario missing top-level '") + key + "'");
    }

    Scenario sc;

    // ---- config ----
    const json& cfg = doc["config"];
    if (!cfg.is_object()) throw ScenarioError("'config' must be an object");
    sc.config.steps = static_cast<int>(number_or(cfg, "steps", 96));
    sc.config.horizon = static_cast<int>(number_or(cfg, "horizon", 8));
    sc.config.alpha = number_or(cfg, "alpha", 1e4);
    sc.config.seed = static_cast<std::uint64_t>(number_or(cfg, "seed", 1));
    sc.config.max_repartition_iters =
        static_cast<int>(number_or(cfg, "max_repartition_iters", 50));
    sc.config.sampling_hours = number_or(cfg, "sampling_hours", 0.25);
    if (cfg.contains("benchmark")) {
        if (!cfg["benchmark"].is_boolean())
            throw ScenarioError("config.benchmark must be a boolean");
        sc.config.benchmark = cfg["benchmark"].get<bool>();
    }
    if (cfg.contains("transfer_bound") && !cfg["transfer_bound"].is_null()) {
        if (!cfg["transfer_bound"].is_number())
            throw ScenarioError("config.transfer_bound must be a number or null");
        sc.network.transfer_bound = cfg["transfer_bound"].get<double>();
        if (*sc.network.transfer_bound <= 0.0)
            throw ScenarioError("config.transfer_bound must be > 0");
    }
    if (sc.config.steps < 1) throw ScenarioError("config.steps must be >= 1");
    if (sc.config.horizon < 1) throw ScenarioError("config.horizon must be >= 1");
    if (sc.config.alpha < 0.0) throw ScenarioError("config.alpha must be >= 0");
    if (sc.config.max_repartition_iters < 1)
        throw ScenarioError("config.max_repartition_iters must be >= 1");
    if (sc.config.sampling_hours <= 0.0)
        throw ScenarioError("config.sampling_hours must be > 0");

    // ---- buses ----
    const json& buses = doc["buses"];
    if (!buses.is_array() || buses.empty())
        throw ScenarioError("'buses' must be a non-empty array");
    const int n = static_cast<int>(buses.size());
    sc.network.buses.resize(n);
    std::vector<char> seen(n, 0);
    std::vector<double> transfer_scalar(n, 1.0);
    for (const json& jb : buses) {
        if (!jb.is_object()) throw ScenarioError("bus entries must be objects");
        if (!jb.contains("id") || !jb["id"].is_number_integer())
            throw ScenarioError("bus missing integer 'id'");
        const int id = jb["id"].get<int>();
        if (id < 0 || id >= n)
            throw ScenarioError("bus ids must be dense 0..n-1; got " + std::to_string(id));
        if (seen[id]) throw ScenarioError("duplicate bus id " + std::to_string(id));
        seen[id] = 1;
        const std::string where = "bus " + std::to_string(id);

        Bus& b = sc.network.buses[id];
        b.id = id;
        b.gen_capacity = number_or(jb, "gen_capacity", 0.0);
        if (b.gen_capacity < 0.0) throw ScenarioError(where + ": gen_capacity must be >= 0");
        b.main_grid = jb.contains("main_grid") && jb["main_grid"].is_boolean()
                          ? jb["main_grid"].get<bool>()
                          : false;
        if (jb.contains("main_grid") && !jb["main_grid"].is_boolean())
            throw ScenarioError(where + ": main_grid must be a boolean");
        if (jb.contains("storage") && !jb["storage"].is_null()) {
            if (!jb["storage"].is_object())
                throw ScenarioError(where + ": storage must be an object or null");
            StorageParams st = parse_storage(jb["storage"], where);
            st.sampling_time = sc.config.sampling_hours;
            b.storage = st;
        }
        if (!jb.contains("load_forecast") || !jb["load_forecast"].is_array())
            throw ScenarioError(where + ": missing 'load_forecast' array");
        for (const json& v : jb["load_forecast"]) {
            if (!v.is_number()) throw ScenarioError(where + ": load_forecast entries must be numbers");
            b.load_forecast.push_back(v.get<double>());
        }
        b.uncertainty_bound = number_or(jb, "uncertainty_bound", 0.0);
        if (b.uncertainty_bound < 0.0)
            throw ScenarioError(where + ": uncertainty_bound must be >= 0");

        double transfer_weight = 1.0;
        if (jb.contains("costs")) {
            const json& jc = jb["costs"];
            if (!jc.is_object()) throw ScenarioError(where + ": costs must be an object");
            b.cost_storage = number_or(jc, "storage", b.cost_storage);
            b.cost_gen = number_or(jc, "gen", b.cost_gen);
            b.cost_import = number_or(jc, "import", b.cost_import);
            transfer_weight = number_or(jc, "transfer", 1.0);
            b.cost_extra_transfer = number_or(jc, "extra_transfer", b.cost_extra_transfer);
        }
        if (b.cost_storage <= 0.0 || b.cost_gen <= 0.0 || b.cost_import <= 0.0 ||
            transfer_weight <= 0.0 || b.cost_extra_transfer <= 0.0)
            throw ScenarioError(where + ": all cost weights must be > 0");
        transfer_scalar[id] = transfer_weight;
    }

    // ---- edges ----
    const json& edges = doc["edges"];
    if (!edges.is_array()) throw ScenarioError("'edges' must be an array");
    for (const json& je : edges) {
        if (!je.is_array() || je.size() != 2 || !je[0].is_number_integer() ||
            !je[1].is_number_integer())
            throw ScenarioError("edges must be [i, j] integer pairs");
        sc.network.edges.emplace_back(je[0].get<int>(), je[1].get<int>());
    }
    finalize_topology(sc.network);
    if (n > 1 && !induced_subgraph_connected(
                     sc.network, [&] {
                         std::vector<BusId> all(n);
                         for (int i = 0; i < n; ++i) all[i] = i;
                         return all;
                     }()))
        throw ScenarioError("network graph is not connected");

    // expand the per-bus transfer weight scalar to one Q entry per incident edge
    for (Bus& b : sc.network.buses) {
        b.cost_transfer.clear();
        for (BusId nb : sc.network.neighbors(b.id))
            b.cost_transfer[nb] = transfer_scalar[b.id];
    }

    // ---- initial partition ----
    const json& part = doc["initial_partition"];
    if (!part.is_array() || part.empty())
        throw ScenarioError("'initial_partition' must be a non-empty array of bus arrays");
    for (const json& jm : part) {
        if (!jm.is_array())
            throw ScenarioError("'initial_partition' entries must be arrays of bus ids");
        std::vector<BusId> members;
        for (const json& v : jm) {
            if (!v.is_number_integer())
                throw ScenarioError("partition member ids must be integers");
            members.push_back(v.get<int>());
        }
        std::sort(members.begin(), members.end());
        sc.initial_partition.members.push_back(std::move(members));
    }
    if (auto violation = validate_partition(sc.network, sc.initial_partition))
        throw ScenarioError("invalid initial partition: " + violation->message);

    // ---- profile lengths ----
    const std::size_t needed =
        static_cast<std::size_t>(sc.config.steps) + static_cast<std::size_t>(sc.config.horizon);
    for (const Bus& b : sc.network.buses) {
        if (b.load_forecast.size() < needed)
            throw ScenarioError("bus " + std::to_string(b.id) + ": load_forecast has " +
                                std::to_string(b.load_forecast.size()) + " entries, needs >= " +
                                std::to_string(needed) + " (steps + horizon)");
    }

    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& sc) {
    json doc;
    json jbuses = json::array();
    for (const Bus& b : sc.network.buses) {
        json jb;
        jb["id"] = b.id;
        jb["gen_capacity"] = b.gen_capacity;
        if (b.storage) {
            const StorageParams& s = *b.storage;
            jb["storage"] = {{"capacity", s.capacity},   {"retention", s.retention},
                             {"soc_min", s.soc_min},     {"soc_max", s.soc_max},
                             {"soc_init", s.soc_init},   {"charge_max", s.charge_max},
                             {"discharge_max", s.discharge_max}};
        } else {
            jb["storage"] = nullptr;
        }
        jb["main_grid"] = b.main_grid;
        jb["load_forecast"] = b.load_forecast;
        jb["uncertainty_bound"] = b.uncertainty_bound;
        // per-edge Q entries all carry the same scalar (see parse); store the scalar
        const double transfer_weight =
            b.cost_transfer.empty() ? 1.0 : b.cost_transfer.begin()->second;
        jb["costs"] = {{"storage", b.cost_storage},
                       {"gen", b.cost_gen},
                       {"import", b.cost_import},
                       {"transfer", transfer_weight},
                       {"extra_transfer", b.cost_extra_transfer}};
        jbuses.push_back(std::move(jb));
    }
    doc["buses"] = std::move(jbuses);

    json jedges = json::array();
    for (const auto& [a, b] : sc.network.edges) jedges.push_back({a, b});
    doc["edges"] = std::move(jedges);

    json jpart = json::array();
    for (const auto& members : sc.initial_partition.members) jpart.push_back(members);
    doc["initial_partition"] = std::move(jpart);

    doc["config"] = {{"steps", sc.config.steps},
                     {"horizon", sc.config.horizon},
                     {"alpha", sc.config.alpha},
                     {"seed", sc.config.seed},
                     {"max_repartition_iters", sc.config.max_repartition_iters},
                     {"sampling_hours", sc.config.sampling_hours},
                     {"benchmark", sc.config.benchmark}};
    if (sc.network.transfer_bound)
        doc["config"]["transfer_bound"] = *sc.network.transfer_bound;

    return doc.dump(2) + "\n";
}

void save_scenario(const Scenario& sc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ScenarioError("cannot write scenario file: " + path);
    out << serialize_scenario(sc);
}

} // namespace microdispatch
