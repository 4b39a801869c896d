#include "rebal/simulator.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace rebal {

namespace {

void fnv1a(std::uint64_t& h, long long value) {
    auto v = static_cast<std::uint64_t>(value);
    for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xff;
        h *= 1099511628211ULL;
    }
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;

}  // namespace

SlotOutcome fulfill_slot(const FleetState& fleet, const DemandMatrix& demand) {
    const int n = fleet.size();
    if (demand.n != n)
        throw std::invalid_argument("fulfill_slot: demand shape does not match fleet");

    SlotOutcome out;
    out.satisfied = DemandMatrix(n);
    out.unsatisfied = DemandMatrix(n);
    out.fleet_after = fleet;

    for (RegionId i = 0; i < n; ++i) {
        const long long requested = demand.row_sum(i);
        if (requested == 0) continue;
        const long long supply = fleet[i];

        if (requested <= supply) {
            for (RegionId j = 0; j < n; ++j)
                out.satisfied.at(i, j) = demand.at(i, j);
        } else if (supply > 0) {
            std::vector<long long> row(static_cast<size_t>(n));
            for (RegionId j = 0; j < n; ++j) row[static_cast<size_t>(j)] = demand.at(i, j);
            const auto served = apportion_largest_remainder(supply, row);
            for (RegionId j = 0; j < n; ++j) out.satisfied.at(i, j) = served[static_cast<size_t>(j)];
        }

        for (RegionId j = 0; j < n; ++j) {
            const int s = out.satisfied.at(i, j);
            out.unsatisfied.at(i, j) = demand.at(i, j) - s;
            out.fleet_after[i] -= s;
            out.fleet_after[j] += s;
        }
    }
    return out;
}

long long rollout_satisfied(FleetState fleet,
                            const std::vector<DemandMatrix>& demand) {
    long long satisfied = 0;
    for (const auto& slot : demand) {
        SlotOutcome out = fulfill_slot(fleet, slot);
        satisfied += out.satisfied.total();
        fleet = std::move(out.fleet_after);
    }
    return satisfied;
}

namespace {

// Scenario bookkeeping for one episode: pre-scaled demand views plus the
// entries that still need runtime injection.
struct PreparedSchedule {
    DemandSeries realized;       // surge applied from its slot to day end
    DemandSeries predict_basis;  // surge applied only when disclosed
    std::vector<ScenarioEntry> entries;
};

PreparedSchedule prepare(const DemandSeries& base, const ScenarioSchedule* schedule,
                         const ExperimentConfig& cfg) {
    PreparedSchedule prep{base, base, {}};
    if (!schedule) return prep;
    prep.entries = schedule->entries();

    for (const auto& e : prep.entries) {
        if (e.kind != ScenarioKind::RisingDemand) continue;
        // Day-scoped surge: from the injection slot through the end of that day.
        const long long from = prep.realized.index_of(e.at);
        const long long to =
            prep.realized.index_of(TimeSlot{e.at.day, cfg.slots_per_day - 1});
        for (long long s = std::max(from, 0LL);
             s <= std::min<long long>(to, prep.realized.size() - 1); ++s) {
            scale_demand_rows(prep.realized.at_index(static_cast<int>(s)), e.ratio,
                              e.regions);
            if (e.disclosed)
                scale_demand_rows(prep.predict_basis.at_index(static_cast<int>(s)),
                                  e.ratio, e.regions);
        }
    }
    return prep;
}

// Narrative + typed fields for every entry active in the window [t, t+period).
// Supply shocks are materialized by the caller at their slot; goals persist
// from their slot onward.
struct WindowScenarios {
    std::vector<EmergentScenario> active;

    bool any() const { return !active.empty(); }

    EmergentScenario merged() const {
        EmergentScenario out = active.front();
        for (size_t k = 1; k < active.size(); ++k) {
            const auto& s = active[k];
            out.narrative += "\n" + s.narrative;
            if (s.demand_ratio) {
                out.demand_ratio = s.demand_ratio;
                out.affected_regions = s.affected_regions;
                out.magnitude_disclosed = s.magnitude_disclosed;
            }
            if (s.supply_delta) out.supply_delta = s.supply_delta;
            if (s.constraint) out.constraint = s.constraint;
        }
        return out;
    }
};

}  // namespace

EpisodeResult run_episode(const EpisodeSpec& spec) {
    if (!spec.series) throw std::invalid_argument("run_episode: series is required");
    spec.cfg.validate();
    const DemandSeries& base = *spec.series;
    const int n = base.regions();
    const int T = spec.cfg.slots_per_day;
    if (spec.initial.size() != n)
        throw std::invalid_argument("run_episode: fleet size does not match series");
    if (base.slots_per_day() != T)
        throw std::invalid_argument("run_episode: series slot grid does not match config");

    const TemplatePool& templates =
        spec.templates ? *spec.templates : TemplatePool::defaults();

    PreparedSchedule prep = prepare(base, spec.schedule, spec.cfg);

    const long long start_index = base.index_of(spec.start);
    if (start_index < 0 || start_index >= base.size())
        throw std::invalid_argument("run_episode: start slot outside the series");
    const long long end_index =
        spec.n_slots < 0 ? base.size()
                         : std::min<long long>(base.size(), start_index + spec.n_slots);

    // Supply shocks must land on decision boundaries: the removal draw and the
    // maintenance narrative happen together, right before the plan is made.
    for (const auto& e : prep.entries) {
        if (e.kind == ScenarioKind::ShrinkingSupply && e.at.slot % spec.cfg.rebalance_period != 0) {
            std::ostringstream msg;
            msg << "shrinking_supply entry at day " << e.at.day << " slot "
                << e.at.slot << " must align with the rebalancing period "
                << spec.cfg.rebalance_period;
            throw ScheduleError(msg.str());
        }
    }

    DemandStats stats = compute_stats(base);

    EpisodeResult result;
    result.per_region_demand.assign(static_cast<size_t>(n), 0);
    result.per_region_satisfied.assign(static_cast<size_t>(n), 0);
    result.per_region_supply.assign(static_cast<size_t>(n), 0);
    result.fare_per_trip = spec.cfg.fare_per_trip;
    result.move_cost = spec.cfg.move_cost;

    std::uint64_t hash = kFnvOffset;
    FleetState fleet = spec.initial;
    for (RegionId i = 0; i < n; ++i) fnv1a(hash, fleet[i]);

    // Goals persist from their slot onward; other scenarios are visible to the
    // adaptation loop only in the window containing their slot.
    std::vector<EmergentScenario> persistent_goals;

    for (long long idx = start_index; idx < end_index; ++idx) {
        const TimeSlot now = base.slot_at(static_cast<int>(idx));

        // Inject supply shocks scheduled for this slot. Alignment with the
        // decision boundary was validated above, so the narratives materialized
        // here are exactly the ones this window's adaptation should see.
        std::vector<EmergentScenario> shocks_now;
        for (const auto& e : prep.entries) {
            if (e.kind != ScenarioKind::ShrinkingSupply || e.at != now) continue;
            auto [reduced, scen] = shrinking_supply(fleet, e.fraction, e.seed, templates);
            fleet = std::move(reduced);
            for (int r : *scen.supply_delta) fnv1a(hash, r);
            shocks_now.push_back(std::move(scen));
        }

        if (now.slot % spec.cfg.rebalance_period == 0) {
            const auto predicted =
                predict_demand(prep.predict_basis, now, spec.cfg.horizon, spec.predictor);

            RebalancingPlan plan =
                rebalance(spec.rebalancer, fleet, predicted, spec.cfg, spec.ga);
            auto violations = validate_plan(fleet, plan, fleet.total());
            if (!violations.empty())
                throw PlanError("episode aborted: rebalancer produced an invalid plan: " +
                                    format_violations(violations),
                                std::move(violations));

            if (spec.adapter) {
                WindowScenarios window;
                for (const auto& goal : persistent_goals) window.active.push_back(goal);
                const long long window_end = now.absolute(T) + spec.cfg.rebalance_period;
                for (const auto& e : prep.entries) {
                    const long long at = e.at.absolute(T);
                    if (at < now.absolute(T) || at >= window_end) continue;
                    switch (e.kind) {
                        case ScenarioKind::RisingDemand:
                            window.active.push_back(surge_scenario(
                                e.ratio, e.regions, n, e.disclosed, e.seed, templates));
                            break;
                        case ScenarioKind::ShrinkingSupply:
                            break;  // materialized above, appended below
                        case ScenarioKind::DynamicGoal: {
                            EmergentScenario scen = dynamic_goal(e.goal);
                            scen.seed = e.seed;
                            persistent_goals.push_back(scen);
                            window.active.push_back(std::move(scen));
                            break;
                        }
                    }
                }
                for (const auto& scen : shocks_now) window.active.push_back(scen);
                if (window.any()) {
                    result.adaptations_attempted += 1;
                    AdaptationTranscript transcript =
                        adapt(plan, fleet, predicted, stats, window.merged(),
                              *spec.adapter, spec.max_reflection_iterations,
                              spec.cfg, now);
                    if (transcript.outcome == AdaptationOutcome::Adapted)
                        result.adaptations_valid += 1;
                    else
                        result.adaptations_fellback += 1;
                    plan = transcript.plan;
                    if (spec.transcripts)
                        spec.transcripts->push_back(std::move(transcript));
                }
            }

            fleet = apply_plan(fleet, plan);
            result.moves_executed += plan.total_moves();
        }

        const DemandMatrix& demand = prep.realized.at_index(static_cast<int>(idx));
        for (int c : demand.cells) fnv1a(hash, c);
        for (RegionId i = 0; i < n; ++i)
            result.per_region_supply[static_cast<size_t>(i)] += fleet[i];

        SlotOutcome outcome = fulfill_slot(fleet, demand);
        result.total_demand += demand.total();
        result.total_satisfied += outcome.satisfied.total();
        for (RegionId i = 0; i < n; ++i) {
            result.per_region_demand[static_cast<size_t>(i)] += demand.row_sum(i);
            result.per_region_satisfied[static_cast<size_t>(i)] +=
                outcome.satisfied.row_sum(i);
        }
        fleet = outcome.fleet_after;
        result.slots.push_back(std::move(outcome));
    }

    result.revenue = spec.cfg.fare_per_trip * static_cast<double>(result.total_satisfied) -
                     spec.cfg.move_cost * static_cast<double>(result.moves_executed);
    result.trace_hash = hash;
    return result;
}

std::string episode_trace_csv(const EpisodeResult& result) {
    std::ostringstream out;
    out << "slot,region,supply,outbound_demand,satisfied\n";
    for (size_t s = 0; s < result.slots.size(); ++s) {
        const SlotOutcome& slot = result.slots[s];
        const int n = slot.fleet_after.size();
        for (RegionId i = 0; i < n; ++i) {
            const long long demand =
                slot.satisfied.row_sum(i) + slot.unsatisfied.row_sum(i);
            // supply before fulfillment = fleet_after + out - in
            long long supply = slot.fleet_after[i];
            for (RegionId j = 0; j < n; ++j)
                supply += slot.satisfied.at(i, j) - slot.satisfied.at(j, i);
            out << s << "," << i << "," << supply << "," << demand << ","
                << slot.satisfied.row_sum(i) << "\n";
        }
    }
    return out.str();
}

}  // namespace rebal
