#ifndef REBAL_SIMULATOR_HPP
#define REBAL_SIMULATOR_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "rebal/adaptation.hpp"
#include "rebal/core.hpp"
#include "rebal/ingest.hpp"
#include "rebal/rebalancer.hpp"
#include "rebal/scenario.hpp"

namespace rebal {

// Demand fulfillment for one slot: satisfied + unsatisfied == demand
// element-wise, and no origin serves more trips than it has vehicles.
struct SlotOutcome {
    DemandMatrix satisfied;
    DemandMatrix unsatisfied;
    FleetState fleet_after;
};

struct EpisodeResult {
    std::vector<SlotOutcome> slots;
    long long total_satisfied = 0;
    long long total_demand = 0;
    long long moves_executed = 0;
    double revenue = 0.0;

    // Episode aggregates for the metrics suite: outbound demand and satisfied
    // trips per origin region, and the sum over slots of each region's supply
    // at the start of the slot.
    std::vector<long long> per_region_demand;
    std::vector<long long> per_region_satisfied;
    std::vector<long long> per_region_supply;

    // Hash over initial fleet, realized demand, and supply-shock draws; paired
    // experiment arms must agree on it bit for bit.
    std::uint64_t trace_hash = 0;

    int adaptations_attempted = 0;
    int adaptations_valid = 0;
    int adaptations_fellback = 0;

    double fare_per_trip = 0.0;
    double move_cost = 0.0;
};

// Serves each origin's outbound requests up to its vehicle count. Shortages
// are apportioned across destinations proportionally to the demand row with
// largest-remainder rounding, lower destination index on ties. Satisfied
// trips move a vehicle origin -> destination; unsatisfied demand is dropped.
SlotOutcome fulfill_slot(const FleetState& fleet, const DemandMatrix& demand);

// Total satisfied trips when `fleet` plays out the given demand slots in
// sequence with no further rebalancing (the GA fitness rollout).
long long rollout_satisfied(FleetState fleet,
                            const std::vector<DemandMatrix>& demand);

// Everything one episode needs. `series` is the unperturbed demand; scenario
// demand/supply deltas are applied inside the runner so that realized demand
// always sees a surge while predictions see it only when disclosed.
struct EpisodeSpec {
    FleetState initial;
    const DemandSeries* series = nullptr;
    RebalancerKind rebalancer = RebalancerKind::Null;
    GAConfig ga;
    Adapter* adapter = nullptr;                    // optional adaptation loop
    const ScenarioSchedule* schedule = nullptr;    // optional perturbations
    PredictorMode predictor = PredictorMode::PerfectForesight;
    ExperimentConfig cfg;
    int max_reflection_iterations = 10;
    TimeSlot start{0, 0};
    int n_slots = -1;                              // -1: through series end
    const TemplatePool* templates = nullptr;       // defaults when null
    std::vector<AdaptationTranscript>* transcripts = nullptr;  // optional sink
};

// Runs the slot loop: at each decision boundary the rebalancer proposes a
// plan from the current fleet and predicted demand; with an adapter attached
// and a scenario active in the window, the self-reflection loop refines it;
// the plan is applied and every slot then fulfills realized demand.
// Deterministic given the spec. Throws PlanError if a rebalancer emits an
// invalid plan.
EpisodeResult run_episode(const EpisodeSpec& spec);

// Per-slot trace rows (slot, region, supply, demand, satisfied) as CSV.
std::string episode_trace_csv(const EpisodeResult& result);

}  // namespace rebal

#endif  // REBAL_SIMULATOR_HPP
