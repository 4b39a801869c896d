#ifndef REBAL_REBALANCER_HPP
#define REBAL_REBALANCER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rebal/core.hpp"

namespace rebal {

enum class RebalancerKind { Null, SDSM, Greedy, GA };

const char* to_string(RebalancerKind kind);
RebalancerKind rebalancer_kind_from_string(const std::string& name);

struct GAConfig {
    int population_size = 50;
    int generations = 100;
    double mutation_rate = 0.1;
    double crossover_rate = 0.9;
    int elite_count = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

using PlanFitness = std::function<double(const RebalancingPlan&)>;

// Per-origin outbound demand summed over the whole prediction horizon, the
// demand aggregate SDSM and Greedy act on.
std::vector<long long> aggregate_outbound(const std::vector<DemandMatrix>& predicted);

// Proportional allocation: target_i = fleet_total * d_i / sum(d) with
// largest-remainder correction. Zero predicted demand keeps the current
// distribution.
std::vector<int> sdsm_targets(const FleetState& state,
                              const std::vector<DemandMatrix>& predicted);

// Turns a target distribution into concrete moves: surplus regions ship to
// deficit regions, larger deficits first, index ascending on ties. Requires
// sum(targets) == fleet total.
RebalancingPlan plan_to_targets(const FleetState& state,
                                const std::vector<int>& targets);

// Moves one vehicle at a time from the largest projected surplus
// (supply - horizon demand) to the largest projected shortage until shortages
// or surpluses run out. Feasible by construction.
RebalancingPlan greedy_rebalance(const FleetState& state,
                                 const std::vector<DemandMatrix>& predicted,
                                 const ExperimentConfig& cfg);

// Genetic search over target distributions (integer compositions of the fleet
// total, so conservation holds by construction). Fitness defaults to the
// satisfied-trip count of a horizon rollout. Returns the best individual ever
// seen; deterministic given ga.seed. `best_per_generation`, when provided,
// receives the running best fitness after each generation.
RebalancingPlan ga_rebalance(const FleetState& state,
                             const std::vector<DemandMatrix>& predicted,
                             const GAConfig& ga,
                             const PlanFitness& fitness = nullptr,
                             std::vector<double>* best_per_generation = nullptr);

// Dispatch on kind. Every returned plan passes validate_plan against `state`.
RebalancingPlan rebalance(RebalancerKind kind, const FleetState& state,
                          const std::vector<DemandMatrix>& predicted,
                          const ExperimentConfig& cfg, const GAConfig& ga = {});

}  // namespace rebal

#endif  // REBAL_REBALANCER_HPP
