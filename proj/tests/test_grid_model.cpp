#include <doctest.h>

#include <cmath>
#include <string>

#include "microdispatch/errors.hpp"
#include "microdispatch/network.hpp"
#include "microdispatch/scenario.hpp"
#include "support/fixtures.hpp"

using namespace microdispatch;
namespace fx = microdispatch::test_fixtures;

namespace {

// 4 buses on a path, 2 microgrids, tiny profiles
std::string path_scenario_json(const std::string& partition) {
    return R"({
      "buses": [
        {"id": 0, "gen_capacity": 100.0, "load_forecast": [0,0,0,0,0,0], "main_grid": true},
        {"id": 1, "load_forecast": [10,10,10,10,10,10], "uncertainty_bound": 1.0},
        {"id": 2, "load_forecast": [60,60,60,60,60,60]},
        {"id": 3, "storage": {"capacity": 500, "soc_min": 0.2, "soc_max": 0.9,
                               "soc_init": 0.5, "charge_max": 50, "discharge_max": 50},
         "load_forecast": [10,10,10,10,10,10]}
      ],
      "edges": [[0,1],[1,2],[2,3]],
      "initial_partition": )" +
           partition + R"(,
      "config": {"steps": 4, "horizon": 2, "alpha": 10000.0, "seed": 7,
                 "max_repartition_iters": 20, "sampling_hours": 0.25}
    })";
}

} // namespace

TEST_CASE("scenario: well-formed document loads with normalized topology") {
    Scenario sc = parse_scenario(path_scenario_json("[[0,1],[2,3]]"));
    CHECK(sc.network.bus_count() == 4);
    CHECK(sc.network.edges.size() == 3);
    CHECK(sc.initial_partition.microgrid_count() == 2);
    CHECK(sc.config.steps == 4);
    CHECK(sc.config.horizon == 2);
    CHECK(sc.config.seed == 7);
    CHECK(sc.network.buses[0].main_grid);
    CHECK(sc.network.buses[0].has_generator());
    CHECK(sc.network.buses[3].has_storage());
    CHECK(sc.network.buses[3].storage->sampling_time == doctest::Approx(0.25));
    // per-edge transfer weights expanded from the scalar
    CHECK(sc.network.buses[1].cost_transfer.size() == 2);
    CHECK(sc.network.buses[1].cost_transfer.at(0) == doctest::Approx(1.0));
    // worst-case load folds the uncertainty bound in
    CHECK(sc.network.worst_case_load(1, 0) == doctest::Approx(11.0));
}

TEST_CASE("scenario: single-bus degenerate network is valid") {
    Scenario sc = parse_scenario(R"({
      "buses": [{"id": 0, "gen_capacity": 20.0, "load_forecast": [5,5,5,5]}],
      "edges": [],
      "initial_partition": [[0]],
      "config": {"steps": 2, "horizon": 2}
    })");
    CHECK(sc.network.bus_count() == 1);
    CHECK(sc.initial_partition.microgrid_count() == 1);
}

TEST_CASE("scenario: malformed inputs are rejected with ScenarioError") {
    // overlapping initial partition names the duplicated bus
    CHECK_THROWS_WITH_AS(parse_scenario(path_scenario_json("[[0,1,2],[2,3]]")),
                         doctest::Contains("bus 2"), ScenarioError);
    // disconnected network
    CHECK_THROWS_WITH_AS(parse_scenario(R"({
        "buses": [{"id":0,"load_forecast":[1,1]},{"id":1,"load_forecast":[1,1]}],
        "edges": [],
        "initial_partition": [[0,1]],
        "config": {"steps": 1, "horizon": 1}
      })"),
                         doctest::Contains("not connected"), ScenarioError);
    // profile shorter than steps + horizon
    CHECK_THROWS_WITH_AS(parse_scenario(R"({
        "buses": [{"id":0,"load_forecast":[1,1,1]}],
        "edges": [],
        "initial_partition": [[0]],
        "config": {"steps": 4, "horizon": 2}
      })"),
                         doctest::Contains("needs >= 6"), ScenarioError);
    // non-JSON input
    CHECK_THROWS_AS(parse_scenario("not json at all"), ScenarioError);
}

TEST_CASE("validate_partition: reports the first violated invariant") {
    NetworkModel net = fx::four_bus_path();

    Partition ok;
    ok.members = {{0, 1}, {2, 3}};
    CHECK(!validate_partition(net, ok).has_value());

    // non-adjacent members: connectivity violation for microgrid 1
    Partition split;
    split.members = {{0, 2}, {1, 3}};
    auto v = validate_partition(net, split);
    REQUIRE(v.has_value());
    CHECK(v->kind == PartitionViolation::Kind::disconnected_microgrid);
    CHECK(v->microgrid == 1);

    // duplicated bus: disjointness violation
    Partition dup;
    dup.members = {{0, 1, 2}, {2, 3}};
    v = validate_partition(net, dup);
    REQUIRE(v.has_value());
    CHECK(v->kind == PartitionViolation::Kind::duplicate_bus);
    CHECK(v->bus == 2);

    // missing bus: cover violation
    Partition missing;
    missing.members = {{0, 1}, {3}};
    v = validate_partition(net, missing);
    REQUIRE(v.has_value());
    CHECK(v->kind == PartitionViolation::Kind::missing_bus);
    CHECK(v->bus == 2);

    // empty microgrid
    Partition empty;
    empty.members = {{0, 1, 2, 3}, {}};
    v = validate_partition(net, empty);
    REQUIRE(v.has_value());
    CHECK(v->kind == PartitionViolation::Kind::empty_microgrid);
    CHECK(v->microgrid == 2);
}

TEST_CASE("disturbance sampler: bounded, deterministic, varies per (bus, step)") {
    NetworkModel net = fx::make_net(
        {
            {.loads = fx::flat(10.0, 8), .uncertainty = 2.0},
            {.loads = fx::flat(10.0, 8), .uncertainty = 0.0},
        },
        {{0, 1}});

    DisturbanceSampler sampler{.seed = 42};

    // zero bound -> exactly zero
    CHECK(sampler.sample(net, 1, 0) == 0.0);

    // bounded and reproducible
    for (int k = 0; k < 8; ++k) {
        const double w = sampler.sample(net, 0, k);
        CHECK(std::fabs(w) <= 2.0);
        CHECK(w == sampler.sample(net, 0, k));
    }

    // different coordinates decorrelate; different seeds change the stream
    CHECK(sampler.sample(net, 0, 0) != sampler.sample(net, 0, 1));
    DisturbanceSampler other{.seed = 43};
    CHECK(sampler.sample(net, 0, 0) != other.sample(net, 0, 0));
}

TEST_CASE("scenario: serialize/parse round-trip is idempotent") {
    Scenario sc = parse_scenario(path_scenario_json("[[0,1],[2,3]]"));
    const std::string text = serialize_scenario(sc);
    Scenario back = parse_scenario(text);
    CHECK(back == sc);
    // a second round-trip is byte-stable
    CHECK(serialize_scenario(back) == text);
}
