#ifndef REBAL_TESTS_BRUTE_FORCE_HPP
#define REBAL_TESTS_BRUTE_FORCE_HPP

// Reference simulator written straight from the stated behavior, kept
// independent of the library: double-precision quotas and an explicit sort
// instead of integer div/mod arithmetic.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rebal::testing {

struct BruteSlot {
    std::vector<std::vector<int>> satisfied;
    std::vector<int> fleet_after;
};

inline BruteSlot brute_fulfill(const std::vector<int>& fleet,
                               const std::vector<std::vector<int>>& demand) {
    const int n = static_cast<int>(fleet.size());
    BruteSlot out;
    out.satisfied.assign(n, std::vector<int>(n, 0));
    out.fleet_after = fleet;

    for (int i = 0; i < n; ++i) {
        long long requested = 0;
        for (int j = 0; j < n; ++j) requested += demand[i][j];
        if (requested == 0) continue;

        if (requested <= fleet[i]) {
            out.satisfied[i] = demand[i];
        } else if (fleet[i] > 0) {
            // floors of the exact quotas, then +1 by largest fractional part,
            // lower destination index on ties
            std::vector<double> quota(n);
            std::vector<int> base(n);
            int assigned = 0;
            for (int j = 0; j < n; ++j) {
                quota[j] = static_cast<double>(fleet[i]) * demand[i][j] /
                           static_cast<double>(requested);
                base[j] = static_cast<int>(std::floor(quota[j] + 1e-9));
                assigned += base[j];
            }
            std::vector<int> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                const double fa = quota[a] - std::floor(quota[a] + 1e-9);
                const double fb = quota[b] - std::floor(quota[b] + 1e-9);
                if (std::abs(fa - fb) > 1e-9) return fa > fb;
                return a < b;
            });
            for (int left = fleet[i] - assigned, k = 0; left > 0; --left, ++k)
                base[order[static_cast<size_t>(k)]] += 1;
            out.satisfied[i] = base;
        }

        for (int j = 0; j < n; ++j) {
            out.fleet_after[i] -= out.satisfied[i][j];
            out.fleet_after[j] += out.satisfied[i][j];
        }
    }
    return out;
}

// Episode with no rebalancing: run every slot, count satisfied trips.
inline long long brute_episode_satisfied(
    std::vector<int> fleet, const std::vector<std::vector<std::vector<int>>>& slots) {
    long long satisfied = 0;
    for (const auto& demand : slots) {
        const BruteSlot out = brute_fulfill(fleet, demand);
        for (const auto& row : out.satisfied)
            for (int c : row) satisfied += c;
        fleet = out.fleet_after;
    }
    return satisfied;
}

}  // namespace rebal::testing

#endif  // REBAL_TESTS_BRUTE_FORCE_HPP
