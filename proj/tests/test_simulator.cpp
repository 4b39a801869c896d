#include <doctest.h>

#include <random>

#include "rebal/simulator.hpp"
#include "support/brute_force.hpp"
#include "support/generators.hpp"

using namespace rebal;

namespace {

DemandSeries series_from(int n, const std::vector<DemandMatrix>& mats,
                         int slots_per_day = 24) {
    DemandSeries series(n, slots_per_day, TimeSlot{0, 0});
    for (const auto& m : mats) series.push_back(m);
    return series;
}

ExperimentConfig desk_config(int n, int period = 12, int horizon = 12) {
    ExperimentConfig cfg;
    cfg.n_regions = n;
    cfg.slots_per_day = 24;
    cfg.rebalance_period = period;
    cfg.horizon = horizon;
    return cfg;
}

}  // namespace

TEST_CASE("fulfill_slot serves everything under ample supply") {
    FleetState fleet(std::vector<int>{5, 0});
    DemandMatrix demand(2);
    demand.at(0, 1) = 3;
    const auto out = fulfill_slot(fleet, demand);
    CHECK(out.satisfied.at(0, 1) == 3);
    CHECK(out.unsatisfied.total() == 0);
    CHECK(out.fleet_after.counts == std::vector<int>{2, 3});
}

TEST_CASE("fulfill_slot drops the shortfall") {
    FleetState fleet(std::vector<int>{2, 0});
    DemandMatrix demand(2);
    demand.at(0, 1) = 3;
    const auto out = fulfill_slot(fleet, demand);
    CHECK(out.satisfied.at(0, 1) == 2);
    CHECK(out.unsatisfied.at(0, 1) == 1);
    CHECK(out.fleet_after.counts == std::vector<int>{0, 2});
}

TEST_CASE("fulfill_slot apportions by largest remainder, low index wins ties") {
    FleetState fleet(std::vector<int>{5, 0, 0});
    DemandMatrix demand(3);
    demand.at(0, 1) = 4;
    demand.at(0, 2) = 4;
    const auto out = fulfill_slot(fleet, demand);
    // quotas 2.5 each; remainders tie; destination 1 wins the extra vehicle
    CHECK(out.satisfied.at(0, 1) == 3);
    CHECK(out.satisfied.at(0, 2) == 2);
}

TEST_CASE("fulfill_slot invariants on random instances") {
    std::mt19937_64 rng(31);
    for (int round = 0; round < 500; ++round) {
        const int n = testing::uniform_int(rng, 1, 6);
        const auto fleet = testing::random_fleet(rng, n, 6);
        const auto demand = testing::random_demand(rng, n, 5);
        const auto out = fulfill_slot(fleet, demand);
        for (int i = 0; i < n; ++i) {
            long long served = 0;
            for (int j = 0; j < n; ++j) {
                CHECK(out.satisfied.at(i, j) + out.unsatisfied.at(i, j) ==
                      demand.at(i, j));
                CHECK(out.satisfied.at(i, j) >= 0);
                served += out.satisfied.at(i, j);
            }
            CHECK(served <= fleet[i]);
            CHECK(out.fleet_after[i] >= 0);
        }
        CHECK(out.fleet_after.total() == fleet.total());
    }
}

TEST_CASE("fulfill_slot matches the reference simulator") {
    std::mt19937_64 rng(37);
    for (int round = 0; round < 500; ++round) {
        const int n = testing::uniform_int(rng, 1, 5);
        const auto fleet = testing::random_fleet(rng, n, 5);
        const auto demand = testing::random_demand(rng, n, 4);

        std::vector<std::vector<int>> demand_rows(static_cast<size_t>(n),
                                                  std::vector<int>(static_cast<size_t>(n)));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) demand_rows[static_cast<size_t>(i)][static_cast<size_t>(j)] = demand.at(i, j);

        const auto expected = testing::brute_fulfill(fleet.counts, demand_rows);
        const auto got = fulfill_slot(fleet, demand);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                CHECK(got.satisfied.at(i, j) == expected.satisfied[static_cast<size_t>(i)][static_cast<size_t>(j)]);
        CHECK(got.fleet_after.counts == expected.fleet_after);
    }
}

TEST_CASE("episode with zero demand has zero satisfaction and zero revenue") {
    const auto series = series_from(3, std::vector<DemandMatrix>(24, DemandMatrix(3)));
    EpisodeSpec spec;
    spec.initial = FleetState(std::vector<int>{4, 4, 4});
    spec.series = &series;
    spec.rebalancer = RebalancerKind::Null;
    spec.cfg = desk_config(3);
    const auto result = run_episode(spec);
    CHECK(result.total_satisfied == 0);
    CHECK(result.total_demand == 0);
    CHECK(result.moves_executed == 0);
    CHECK(result.revenue == 0.0);
}

TEST_CASE("single-region episode serves min(supply, demand) each slot") {
    std::vector<DemandMatrix> mats;
    for (int s = 0; s < 4; ++s) {
        DemandMatrix m(1);
        m.at(0, 0) = 3 + s;  // intra-region trips
        mats.push_back(std::move(m));
    }
    const auto series = series_from(1, mats);
    EpisodeSpec spec;
    spec.initial = FleetState(std::vector<int>{4});
    spec.series = &series;
    spec.cfg = desk_config(1, 1, 1);
    const auto result = run_episode(spec);
    // intra-region trips return the vehicle: min(4, 3+s) per slot
    CHECK(result.total_satisfied == 3 + 4 + 4 + 4);
    CHECK(result.moves_executed == 0);
}

TEST_CASE("two-slot episode value frozen from the reference simulator") {
    std::vector<DemandMatrix> mats(2, DemandMatrix(2));
    mats[0].at(0, 1) = 1;
    mats[1].at(1, 0) = 2;
    const auto series = series_from(2, mats);
    EpisodeSpec spec;
    spec.initial = FleetState(std::vector<int>{2, 0});
    spec.series = &series;
    spec.cfg = desk_config(2, 2, 2);

    const long long expected = testing::brute_episode_satisfied(
        {2, 0}, {{{0, 1}, {0, 0}}, {{0, 0}, {2, 0}}});
    CHECK(expected == 2);  // slot 0 serves 1, slot 1 has one vehicle at region 1
    CHECK(run_episode(spec).total_satisfied == expected);
}

TEST_CASE("null-policy episodes match the reference simulator exactly") {
    std::mt19937_64 rng(53);
    for (int round = 0; round < 200; ++round) {
        const int n = testing::uniform_int(rng, 1, 3);
        const int slots = testing::uniform_int(rng, 1, 3);
        const auto fleet = testing::random_fleet(rng, n, 4);

        std::vector<DemandMatrix> mats;
        std::vector<std::vector<std::vector<int>>> raw;
        for (int s = 0; s < slots; ++s) {
            const auto m = testing::random_demand(rng, n, 3);
            std::vector<std::vector<int>> rows(static_cast<size_t>(n),
                                               std::vector<int>(static_cast<size_t>(n)));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) rows[static_cast<size_t>(i)][static_cast<size_t>(j)] = m.at(i, j);
            mats.push_back(m);
            raw.push_back(std::move(rows));
        }
        const auto series = series_from(n, mats, 24);

        EpisodeSpec spec;
        spec.initial = fleet;
        spec.series = &series;
        spec.cfg = desk_config(n, 1, 1);
        spec.rebalancer = RebalancerKind::Null;

        CHECK(run_episode(spec).total_satisfied ==
              testing::brute_episode_satisfied(fleet.counts, raw));
    }
}

TEST_CASE("vehicle conservation holds across an episode with a supply shock") {
    const auto series = series_from(
        3, std::vector<DemandMatrix>(48, [] {
               DemandMatrix m(3);
               m.at(0, 1) = 2;
               m.at(1, 2) = 1;
               return m;
           }()));
    ScenarioEntry shock;
    shock.at = TimeSlot{1, 0};
    shock.kind = ScenarioKind::ShrinkingSupply;
    shock.fraction = 0.25;
    shock.seed = 8;
    const ScenarioSchedule schedule({shock}, 24);

    EpisodeSpec spec;
    spec.initial = FleetState(std::vector<int>{8, 4, 0});
    spec.series = &series;
    spec.schedule = &schedule;
    spec.cfg = desk_config(3);
    const auto result = run_episode(spec);

    const long long removed = std::llround(0.25 * 12);
    for (size_t s = 0; s < result.slots.size(); ++s) {
        const long long expected_total = s < 24 ? 12 : 12 - removed;
        CHECK(result.slots[s].fleet_after.total() == expected_total);
    }
}

TEST_CASE("adding vehicles never decreases total satisfaction") {
    std::mt19937_64 rng(61);
    for (int round = 0; round < 150; ++round) {
        const int n = testing::uniform_int(rng, 2, 4);
        const int slots = testing::uniform_int(rng, 1, 4);
        auto fleet = testing::random_fleet(rng, n, 4);
        std::vector<DemandMatrix> mats;
        for (int s = 0; s < slots; ++s) mats.push_back(testing::random_demand(rng, n, 3));
        const auto series = series_from(n, mats);

        EpisodeSpec spec;
        spec.initial = fleet;
        spec.series = &series;
        spec.cfg = desk_config(n, 1, 1);
        const long long before = run_episode(spec).total_satisfied;

        auto more = fleet;
        more[testing::uniform_int(rng, 0, n - 1)] += testing::uniform_int(rng, 1, 3);
        spec.initial = more;
        CHECK(run_episode(spec).total_satisfied >= before);
    }
}

TEST_CASE("episodes are deterministic") {
    const auto series = generate_synthetic(4, 48, 0.9, 17);
    EpisodeSpec spec;
    spec.initial = FleetState(std::vector<int>{5, 5, 5, 5});
    spec.series = &series;
    spec.rebalancer = RebalancerKind::Greedy;
    spec.cfg = desk_config(4);
    spec.cfg.rng_seed = 99;

    const auto a = run_episode(spec);
    const auto b = run_episode(spec);
    CHECK(a.total_satisfied == b.total_satisfied);
    CHECK(a.trace_hash == b.trace_hash);
    CHECK(a.revenue == b.revenue);
    REQUIRE(a.slots.size() == b.slots.size());
    for (size_t s = 0; s < a.slots.size(); ++s)
        CHECK(a.slots[s].fleet_after == b.slots[s].fleet_after);
}

TEST_CASE("revenue follows the fare-minus-move-cost identity") {
    const auto series = generate_synthetic(4, 24, 1.2, 23);
    EpisodeSpec spec;
    spec.initial = FleetState(std::vector<int>{2, 2, 2, 2});
    spec.series = &series;
    spec.rebalancer = RebalancerKind::SDSM;
    spec.cfg = desk_config(4);
    spec.cfg.fare_per_trip = 2.5;
    spec.cfg.move_cost = 0.4;
    const auto result = run_episode(spec);
    CHECK(result.revenue ==
          doctest::Approx(2.5 * result.total_satisfied - 0.4 * result.moves_executed));
    CHECK(result.total_satisfied <= result.total_demand);
}

TEST_CASE("episode aborts with the violation list on an invalid plan") {
    // a rebalancer that overdraws region 0 by construction cannot come from the
    // library; emulate the abort path by validating directly
    FleetState state(std::vector<int>{1, 0});
    RebalancingPlan bad(2);
    bad.at(0, 1) = 5;
    CHECK_THROWS_AS(apply_plan(state, bad), PlanError);
}

TEST_CASE("misaligned supply shocks are rejected") {
    const auto series = series_from(2, std::vector<DemandMatrix>(24, DemandMatrix(2)));
    ScenarioEntry shock;
    shock.at = TimeSlot{0, 5};  // not a decision boundary
    shock.kind = ScenarioKind::ShrinkingSupply;
    shock.fraction = 0.1;
    const ScenarioSchedule schedule({shock}, 24);

    EpisodeSpec spec;
    spec.initial = FleetState(std::vector<int>{4, 4});
    spec.series = &series;
    spec.schedule = &schedule;
    spec.cfg = desk_config(2);
    CHECK_THROWS_AS(run_episode(spec), ScheduleError);
}
