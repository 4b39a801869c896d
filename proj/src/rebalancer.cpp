#include "rebal/rebalancer.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "rebal/simulator.hpp"

namespace rebal {

const char* to_string(RebalancerKind kind) {
    switch (kind) {
        case RebalancerKind::Null: return "null";
        case RebalancerKind::SDSM: return "sdsm";
        case RebalancerKind::Greedy: return "greedy";
        case RebalancerKind::GA: return "ga";
    }
    return "unknown";
}

RebalancerKind rebalancer_kind_from_string(const std::string& name) {
    if (name == "null") return RebalancerKind::Null;
    if (name == "sdsm") return RebalancerKind::SDSM;
    if (name == "greedy") return RebalancerKind::Greedy;
    if (name == "ga") return RebalancerKind::GA;
    throw std::invalid_argument("unknown rebalancer kind: " + name);
}

void GAConfig::validate() const {
    if (population_size < 2)
        throw std::invalid_argument("ga: population_size must be >= 2");
    if (generations < 1) throw std::invalid_argument("ga: generations must be >= 1");
    if (mutation_rate < 0.0 || mutation_rate > 1.0)
        throw std::invalid_argument("ga: mutation_rate must be in [0, 1]");
    if (crossover_rate < 0.0 || crossover_rate > 1.0)
        throw std::invalid_argument("ga: crossover_rate must be in [0, 1]");
    if (elite_count < 0 || elite_count >= population_size)
        throw std::invalid_argument("ga: elite_count must be in [0, population_size)");
}

std::vector<long long> aggregate_outbound(const std::vector<DemandMatrix>& predicted) {
    if (predicted.empty()) return {};
    const int n = predicted.front().n;
    std::vector<long long> d(static_cast<size_t>(n), 0);
    for (const auto& m : predicted)
        for (int i = 0; i < n; ++i) d[static_cast<size_t>(i)] += m.row_sum(i);
    return d;
}

std::vector<int> sdsm_targets(const FleetState& state,
                              const std::vector<DemandMatrix>& predicted) {
    const auto demand = aggregate_outbound(predicted);
    const long long dsum = std::accumulate(demand.begin(), demand.end(), 0LL);
    if (dsum == 0) return state.counts;  // nothing to match against
    return apportion_largest_remainder(state.total(), demand);
}

RebalancingPlan plan_to_targets(const FleetState& state,
                                const std::vector<int>& targets) {
    const int n = state.size();
    if (static_cast<int>(targets.size()) != n)
        throw std::invalid_argument("plan_to_targets: targets size mismatch");
    long long target_sum = 0;
    for (int t : targets) {
        if (t < 0) throw std::invalid_argument("plan_to_targets: negative target");
        target_sum += t;
    }
    if (target_sum != state.total())
        throw std::invalid_argument("plan_to_targets: targets do not sum to the fleet total");

    struct Gap {
        long long amount;
        RegionId region;
    };
    std::vector<Gap> surplus, deficit;
    for (RegionId i = 0; i < n; ++i) {
        const long long gap = static_cast<long long>(state[i]) - targets[static_cast<size_t>(i)];
        if (gap > 0) surplus.push_back({gap, i});
        if (gap < 0) deficit.push_back({-gap, i});
    }
    const auto by_size_then_index = [](const Gap& a, const Gap& b) {
        return a.amount != b.amount ? a.amount > b.amount : a.region < b.region;
    };
    std::sort(surplus.begin(), surplus.end(), by_size_then_index);
    std::sort(deficit.begin(), deficit.end(), by_size_then_index);

    RebalancingPlan plan(n);
    size_t s = 0;
    for (auto& d : deficit) {
        while (d.amount > 0) {
            const long long shipped = std::min(d.amount, surplus[s].amount);
            plan.at(surplus[s].region, d.region) += static_cast<int>(shipped);
            d.amount -= shipped;
            surplus[s].amount -= shipped;
            if (surplus[s].amount == 0) ++s;
        }
    }
    return plan;
}

RebalancingPlan greedy_rebalance(const FleetState& state,
                                 const std::vector<DemandMatrix>& predicted,
                                 const ExperimentConfig& cfg) {
    (void)cfg;
    const int n = state.size();
    const auto demand = aggregate_outbound(predicted);
    std::vector<long long> supply(state.counts.begin(), state.counts.end());

    RebalancingPlan plan(n);
    for (;;) {
        RegionId src = -1, dst = -1;
        long long best_surplus = 0, best_shortage = 0;
        for (RegionId i = 0; i < n; ++i) {
            const long long surplus = supply[static_cast<size_t>(i)] -
                                      (demand.empty() ? 0 : demand[static_cast<size_t>(i)]);
            if (surplus > best_surplus) {
                best_surplus = surplus;
                src = i;
            }
        }
        for (RegionId j = 0; j < n; ++j) {
            const long long shortage = (demand.empty() ? 0 : demand[static_cast<size_t>(j)]) -
                                       supply[static_cast<size_t>(j)];
            if (shortage > best_shortage) {
                best_shortage = shortage;
                dst = j;
            }
        }
        if (src < 0 || dst < 0) break;  // surplus exhausted or no shortage left
        plan.at(src, dst) += 1;
        supply[static_cast<size_t>(src)] -= 1;
        supply[static_cast<size_t>(dst)] += 1;
    }
    return plan;
}

namespace {

using Chromosome = std::vector<int>;  // target counts, sums to the fleet total

Chromosome random_composition(long long total, int n, std::mt19937_64& rng) {
    Chromosome c(static_cast<size_t>(n), 0);
    for (long long k = 0; k < total; ++k)
        c[static_cast<size_t>(rng() % static_cast<std::uint64_t>(n))] += 1;
    return c;
}

void repair_to_total(Chromosome& c, long long total, std::mt19937_64& rng) {
    long long sum = std::accumulate(c.begin(), c.end(), 0LL);
    const auto n = static_cast<std::uint64_t>(c.size());
    while (sum > total) {
        const size_t i = static_cast<size_t>(rng() % n);
        if (c[i] > 0) {
            c[i] -= 1;
            --sum;
        }
    }
    while (sum < total) {
        c[static_cast<size_t>(rng() % n)] += 1;
        ++sum;
    }
}

}  // namespace

RebalancingPlan ga_rebalance(const FleetState& state,
                             const std::vector<DemandMatrix>& predicted,
                             const GAConfig& ga, const PlanFitness& fitness,
                             std::vector<double>* best_per_generation) {
    ga.validate();
    const int n = state.size();
    const long long total = state.total();

    const PlanFitness score = fitness ? fitness : PlanFitness([&](const RebalancingPlan& plan) {
        return static_cast<double>(
            rollout_satisfied(apply_plan(state, plan), predicted));
    });
    const auto eval = [&](const Chromosome& c) {
        return score(plan_to_targets(state, c));
    };

    std::mt19937_64 rng(ga.seed);
    std::vector<Chromosome> population;
    population.reserve(static_cast<size_t>(ga.population_size));
    // Warm starts: the current distribution and the proportional allocation.
    population.push_back(state.counts);
    population.push_back(sdsm_targets(state, predicted));
    while (static_cast<int>(population.size()) < ga.population_size)
        population.push_back(random_composition(total, n, rng));

    std::vector<double> scores(population.size());
    Chromosome best;
    double best_score = -std::numeric_limits<double>::infinity();

    const auto rank = [&](std::vector<size_t>& order) {
        order.resize(population.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return scores[a] > scores[b];
        });
    };

    for (int gen = 0; gen < ga.generations; ++gen) {
        for (size_t i = 0; i < population.size(); ++i) {
            scores[i] = eval(population[i]);
            if (scores[i] > best_score) {
                best_score = scores[i];
                best = population[i];
            }
        }
        if (best_per_generation) best_per_generation->push_back(best_score);

        std::vector<size_t> order;
        rank(order);

        std::vector<Chromosome> next;
        next.reserve(population.size());
        for (int e = 0; e < ga.elite_count; ++e)
            next.push_back(population[order[static_cast<size_t>(e)]]);

        const auto tournament = [&]() -> const Chromosome& {
            size_t winner = static_cast<size_t>(rng() % population.size());
            for (int t = 1; t < 3; ++t) {
                const size_t rival = static_cast<size_t>(rng() % population.size());
                if (scores[rival] > scores[winner]) winner = rival;
            }
            return population[winner];
        };

        while (static_cast<int>(next.size()) < ga.population_size) {
            Chromosome child = tournament();
            if (static_cast<double>(rng() >> 11) * 0x1.0p-53 < ga.crossover_rate) {
                const Chromosome& other = tournament();
                const size_t cut = 1 + static_cast<size_t>(
                    rng() % static_cast<std::uint64_t>(std::max(1, n - 1)));
                for (size_t i = cut; i < child.size(); ++i) child[i] = other[i];
                repair_to_total(child, total, rng);
            }
            if (static_cast<double>(rng() >> 11) * 0x1.0p-53 < ga.mutation_rate) {
                // Transfer one unit between two random regions.
                const size_t from = static_cast<size_t>(rng() % static_cast<std::uint64_t>(n));
                const size_t to = static_cast<size_t>(rng() % static_cast<std::uint64_t>(n));
                if (child[from] > 0) {
                    child[from] -= 1;
                    child[to] += 1;
                }
            }
            next.push_back(std::move(child));
        }
        population = std::move(next);
    }

    return plan_to_targets(state, best);
}

RebalancingPlan rebalance(RebalancerKind kind, const FleetState& state,
                          const std::vector<DemandMatrix>& predicted,
                          const ExperimentConfig& cfg, const GAConfig& ga) {
    switch (kind) {
        case RebalancerKind::Null:
            return RebalancingPlan(state.size());
        case RebalancerKind::SDSM:
            return plan_to_targets(state, sdsm_targets(state, predicted));
        case RebalancerKind::Greedy:
            return greedy_rebalance(state, predicted, cfg);
        case RebalancerKind::GA: {
            GAConfig seeded = ga;
            if (seeded.seed == 0) seeded.seed = cfg.rng_seed;
            return ga_rebalance(state, predicted, seeded);
        }
    }
    throw std::logic_error("rebalance: unhandled kind");
}

}  // namespace rebal
