#include <doctest.h>

#include <cmath>
#include <regex>

#include "rebal/scenario.hpp"
#include "support/generators.hpp"

using namespace rebal;

namespace {

DemandSeries flat_series(int n, int slots, int value) {
    DemandSeries series(n, 24, TimeSlot{0, 0});
    for (int s = 0; s < slots; ++s) {
        DemandMatrix m(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) m.at(i, j) = value;
        series.push_back(std::move(m));
    }
    return series;
}

bool contains_percentage(const std::string& text) {
    static const std::regex kPct(R"(\d+(\.\d+)?\s*%)");
    return std::regex_search(text, kPct);
}

}  // namespace

TEST_CASE("rising demand scales entries with half-up rounding") {
    DemandSeries series(2, 24, TimeSlot{0, 0});
    DemandMatrix m(2);
    m.at(0, 1) = 10;
    series.push_back(std::move(m));

    auto [scaled, scenario] = rising_demand(series, 0.5, {}, true, 1);
    CHECK(scaled.at_index(0).at(0, 1) == 15);
    CHECK(scenario.kind == ScenarioKind::RisingDemand);
    CHECK(*scenario.demand_ratio == 0.5);
}

TEST_CASE("rising demand leaves zero entries at zero") {
    DemandSeries series(2, 24, TimeSlot{0, 0});
    series.push_back(DemandMatrix(2));
    auto [scaled, scenario] = rising_demand(series, 0.2, {}, true, 1);
    CHECK(scaled.at_index(0).total() == 0);
}

TEST_CASE("rising demand grows the matrix sum by the ratio within rounding") {
    const auto series = flat_series(3, 8, 7);
    const double ratio = 0.35;
    auto [scaled, scenario] = rising_demand(series, ratio, {}, true, 9);
    for (int s = 0; s < series.size(); ++s) {
        const double before = static_cast<double>(series.at_index(s).total());
        const double after = static_cast<double>(scaled.at_index(s).total());
        const double entries = 3.0 * 3.0;
        CHECK(after >= before);
        CHECK(std::abs(after - before * (1.0 + ratio)) <= 0.5 * entries + 1.0);
    }
}

TEST_CASE("rising demand only touches affected origins") {
    const auto series = flat_series(3, 2, 4);
    auto [scaled, scenario] = rising_demand(series, 1.0, {1}, true, 3);
    CHECK(scaled.at_index(0).row_sum(0) == series.at_index(0).row_sum(0));
    CHECK(scaled.at_index(0).row_sum(1) == 2 * series.at_index(0).row_sum(1));
    CHECK(scaled.at_index(0).row_sum(2) == series.at_index(0).row_sum(2));
}

TEST_CASE("disclosed surge narrative states the exact per-region percentage") {
    const auto scenario = surge_scenario(0.5, {2, 4}, 6, true, 11);
    CHECK(scenario.magnitude_disclosed);
    CHECK(scenario.narrative.find("Region 2") != std::string::npos);
    CHECK(scenario.narrative.find("Region 4") != std::string::npos);
    CHECK(scenario.narrative.find("50%") != std::string::npos);

    const auto fractional = surge_scenario(0.125, {0}, 3, true, 11);
    CHECK(fractional.narrative.find("12.5%") != std::string::npos);
}

TEST_CASE("latent surge narrative carries no numeric ratio") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto scenario = surge_scenario(0.8, {3}, 6, false, seed);
        CHECK(!scenario.magnitude_disclosed);
        CHECK(scenario.narrative.find("Region 3") != std::string::npos);
        CHECK(!contains_percentage(scenario.narrative));
    }
}

TEST_CASE("shrinking supply removes the rounded fraction of the fleet") {
    FleetState state(std::vector<int>(10, 10));  // total 100
    auto [after, scenario] = shrinking_supply(state, 0.10, 5);
    CHECK(after.total() == 90);
    long long removed = 0;
    for (int r : *scenario.supply_delta) {
        CHECK(r >= 0);
        removed += r;
    }
    CHECK(removed == 10);
    CHECK(scenario.narrative.find("Region") != std::string::npos);
}

TEST_CASE("shrinking supply on a single region") {
    FleetState state(std::vector<int>{20});
    auto [after, scenario] = shrinking_supply(state, 0.10, 5);
    CHECK(after.counts == std::vector<int>{18});
}

TEST_CASE("shrinking supply is deterministic per seed") {
    FleetState state(std::vector<int>{7, 3, 12, 0, 5});
    auto [a_after, a] = shrinking_supply(state, 0.25, 123);
    auto [b_after, b] = shrinking_supply(state, 0.25, 123);
    CHECK(*a.supply_delta == *b.supply_delta);
    CHECK(a.narrative == b.narrative);
    auto [c_after, c] = shrinking_supply(state, 0.25, 124);
    CHECK(a_after.total() == c_after.total());  // same count, possibly elsewhere
}

TEST_CASE("shrinking supply never drives a region negative") {
    std::mt19937_64 rng(77);
    for (int round = 0; round < 200; ++round) {
        const int n = testing::uniform_int(rng, 1, 8);
        auto state = testing::random_fleet(rng, n, 12);
        if (state.total() == 0) state[0] = 1;
        const double fraction = 0.05 + 0.9 * testing::uniform_unit(rng);
        auto [after, scenario] = shrinking_supply(state, fraction, rng());
        for (int i = 0; i < n; ++i) CHECK(after[i] >= 0);
        CHECK(after.total() ==
              state.total() - std::llround(fraction * static_cast<double>(state.total())));
    }
}

TEST_CASE("shrinking supply rejects out-of-range fractions") {
    FleetState state(std::vector<int>{5});
    CHECK_THROWS_AS(shrinking_supply(state, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(shrinking_supply(state, 1.0, 1), std::invalid_argument);
}

TEST_CASE("dynamic goal narratives name their metric") {
    GoalDescriptor goal;
    goal.metric = EquityMetric::EquityVariance;
    auto scenario = dynamic_goal(goal);
    CHECK(scenario.narrative.find("equity") != std::string::npos);
    CHECK(scenario.narrative.find("demand-supply ratio") != std::string::npos);

    goal.metric = EquityMetric::Gini;
    CHECK(dynamic_goal(goal).narrative.find("Gini coefficient") != std::string::npos);

    goal.metric = EquityMetric::Theil;
    CHECK(dynamic_goal(goal).narrative.find("Theil index") != std::string::npos);
}

TEST_CASE("schedule rejects same-slot same-kind duplicates") {
    ScenarioEntry a;
    a.at = TimeSlot{0, 12};
    a.kind = ScenarioKind::RisingDemand;
    a.ratio = 0.5;
    CHECK_THROWS_AS(ScenarioSchedule({a, a}, 24), ScheduleError);

    ScenarioEntry b = a;
    b.kind = ScenarioKind::DynamicGoal;
    CHECK_NOTHROW(ScenarioSchedule({a, b}, 24));  // same slot, different kind
}

TEST_CASE("schedule rejects decreasing slots") {
    ScenarioEntry a;
    a.at = TimeSlot{0, 12};
    ScenarioEntry b;
    b.at = TimeSlot{0, 4};
    CHECK_THROWS_AS(ScenarioSchedule({a, b}, 24), ScheduleError);
}

TEST_CASE("schedule parses from its JSON wire form") {
    const auto schedule = ScenarioSchedule::parse(R"([
        {"day": 0, "slot": 12, "kind": "rising_demand", "ratio": 0.5,
         "regions": [1, 2], "disclosed": false, "seed": 9},
        {"day": 1, "slot": 0, "kind": "shrinking_supply", "fraction": 0.1},
        {"day": 1, "slot": 12, "kind": "dynamic_goal", "metric": "gini"}
    ])", 24);
    REQUIRE(schedule.entries().size() == 3);
    CHECK(schedule.entries()[0].kind == ScenarioKind::RisingDemand);
    CHECK(schedule.entries()[0].regions == std::vector<RegionId>{1, 2});
    CHECK(!schedule.entries()[0].disclosed);
    CHECK(schedule.entries()[1].fraction == 0.1);
    CHECK(schedule.entries()[2].goal.metric == EquityMetric::Gini);
    CHECK_THROWS_AS(ScenarioSchedule::parse(R"([{"slot": 0, "kind": "nope"}])", 24),
                    ScheduleError);
}

TEST_CASE("template pool override keeps families non-empty") {
    CHECK_THROWS_AS(TemplatePool::load("/nonexistent/pool.json"), std::runtime_error);
    const auto defaults = TemplatePool::defaults();
    CHECK(!defaults.latent_surge.empty());
    CHECK(!defaults.disclosed_surge.empty());
    CHECK(!defaults.maintenance.empty());
}
