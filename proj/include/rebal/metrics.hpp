#ifndef REBAL_METRICS_HPP
#define REBAL_METRICS_HPP

#include <string>
#include <vector>

#include "rebal/core.hpp"

namespace rebal {

struct EpisodeResult;  // simulator.hpp

struct SatisfactionRate {
    double avg = 0.0;                    // unweighted mean over regions with demand
    std::vector<double> per_region;     // regions without demand report 1.0
    bool all_zero_demand = false;       // avg is the flagged 1.0 default
};

struct MetricsReport {
    double avg_satisfaction = 0.0;
    double equity = 0.0;                 // negated squared ratio deviation, <= 0
    double gini = 0.0;
    double theil = 0.0;
    double revenue = 0.0;
    std::vector<double> per_region_satisfaction;
    bool zero_demand_flagged = false;
    bool zero_ratio_substituted = false;  // theil saw zero entries
};

// Per-region satisfied / demanded trip ratio aggregated over the episode.
// Regions with zero total demand are excluded from the mean; an episode with
// no demand anywhere reports avg = 1.0 with the flag set.
SatisfactionRate satisfaction_rate(const EpisodeResult& result);

// Negated sum of squared deviations of per-region demand-supply ratios from
// the city-wide ratio. 0 is perfect equity; more negative is worse. Zero-supply
// regions use a denominator of 1 so unserved demand still counts against them.
double equity_variance(const std::vector<long long>& supply,
                       const std::vector<long long>& demand);

// Gini coefficient: sum_i sum_j |x_i - x_j| / (2 n^2 mu). An all-zero vector
// is defined as 0 (flag reported through metrics_report).
double gini(const std::vector<double>& values);

// Theil index: (1/n) sum (x_i/mu) ln(x_i/mu). Zero entries are substituted
// with 1e-6 * mu before evaluation; `substituted` reports whether that fired.
double theil(std::vector<double> values, bool* substituted = nullptr);

// Per-region demand-supply ratios with the max(supply, 1) guard, the input for
// the gini/theil inequality metrics.
std::vector<double> demand_supply_ratios(const std::vector<long long>& supply,
                                         const std::vector<long long>& demand);

// Full metric set for one finished episode.
MetricsReport metrics_report(const EpisodeResult& result);

}  // namespace rebal

#endif  // REBAL_METRICS_HPP
