#include "rebal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rebal/simulator.hpp"

namespace rebal {

SatisfactionRate satisfaction_rate(const EpisodeResult& result) {
    const size_t n = result.per_region_demand.size();
    SatisfactionRate rate;
    rate.per_region.assign(n, 1.0);

    double sum = 0.0;
    int counted = 0;
    for (size_t i = 0; i < n; ++i) {
        if (result.per_region_demand[i] == 0) continue;  // no demand, no score
        rate.per_region[i] = static_cast<double>(result.per_region_satisfied[i]) /
                             static_cast<double>(result.per_region_demand[i]);
        sum += rate.per_region[i];
        ++counted;
    }
    if (counted == 0) {
        rate.avg = 1.0;
        rate.all_zero_demand = true;
    } else {
        rate.avg = sum / counted;
    }
    return rate;
}

std::vector<double> demand_supply_ratios(const std::vector<long long>& supply,
                                         const std::vector<long long>& demand) {
    if (supply.size() != demand.size())
        throw std::invalid_argument("demand_supply_ratios: size mismatch");
    std::vector<double> r(supply.size());
    for (size_t i = 0; i < supply.size(); ++i) {
        r[i] = static_cast<double>(demand[i]) /
               static_cast<double>(std::max<long long>(supply[i], 1));
    }
    return r;
}

double equity_variance(const std::vector<long long>& supply,
                       const std::vector<long long>& demand) {
    const long long total_supply = std::accumulate(supply.begin(), supply.end(), 0LL);
    if (total_supply <= 0)
        throw std::invalid_argument("equity_variance: city-wide supply must be > 0");
    const long long total_demand = std::accumulate(demand.begin(), demand.end(), 0LL);

    const double city_ratio =
        static_cast<double>(total_demand) / static_cast<double>(total_supply);
    const auto ratios = demand_supply_ratios(supply, demand);

    double sum_sq = 0.0;
    for (double r : ratios) {
        const double d = r - city_ratio;
        sum_sq += d * d;
    }
    return -sum_sq;  // 0 is perfect equity, more negative is worse
}

double gini(const std::vector<double>& values) {
    const size_t n = values.size();
    if (n == 0) throw std::invalid_argument("gini: empty input");
    double sum = 0.0;
    for (double v : values) {
        if (v < 0) throw std::invalid_argument("gini: negative value");
        sum += v;
    }
    if (sum == 0.0) return 0.0;  // flagged upstream

    const double mu = sum / static_cast<double>(n);
    double abs_diff = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) abs_diff += std::abs(values[i] - values[j]);
    return abs_diff / (2.0 * static_cast<double>(n) * static_cast<double>(n) * mu);
}

double theil(std::vector<double> values, bool* substituted) {
    const size_t n = values.size();
    if (n == 0) throw std::invalid_argument("theil: empty input");
    double sum = 0.0;
    for (double v : values) {
        if (v < 0) throw std::invalid_argument("theil: negative value");
        sum += v;
    }
    if (substituted) *substituted = false;
    if (sum == 0.0) return 0.0;

    // Theil is undefined at zero; replace zeros with a tiny share of the mean.
    const double mu0 = sum / static_cast<double>(n);
    bool any_zero = false;
    for (double& v : values) {
        if (v == 0.0) {
            v = 1e-6 * mu0;
            any_zero = true;
        }
    }
    if (substituted) *substituted = any_zero;

    const double mu = std::accumulate(values.begin(), values.end(), 0.0) /
                      static_cast<double>(n);
    double t = 0.0;
    for (double v : values) {
        const double share = v / mu;
        t += share * std::log(share);
    }
    return t / static_cast<double>(n);
}

MetricsReport metrics_report(const EpisodeResult& result) {
    MetricsReport report;

    const SatisfactionRate rate = satisfaction_rate(result);
    report.avg_satisfaction = rate.avg;
    report.per_region_satisfaction = rate.per_region;
    report.zero_demand_flagged = rate.all_zero_demand;

    report.equity = equity_variance(result.per_region_supply, result.per_region_demand);
    const auto ratios =
        demand_supply_ratios(result.per_region_supply, result.per_region_demand);
    report.gini = gini(ratios);
    report.theil = theil(ratios, &report.zero_ratio_substituted);
    report.revenue = result.revenue;
    return report;
}

}  // namespace rebal
