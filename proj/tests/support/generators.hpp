#ifndef REBAL_TESTS_GENERATORS_HPP
#define REBAL_TESTS_GENERATORS_HPP

// Hand-rolled seeded generators for property-style tests.

#include <cstdint>
#include <random>
#include <vector>

#include "rebal/core.hpp"

namespace rebal::testing {

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline FleetState random_fleet(std::mt19937_64& rng, int n, int max_per_region) {
    FleetState state = FleetState::filled(n, 0);
    for (int i = 0; i < n; ++i) state[i] = uniform_int(rng, 0, max_per_region);
    return state;
}

inline DemandMatrix random_demand(std::mt19937_64& rng, int n, int max_entry) {
    DemandMatrix m(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m.at(i, j) = uniform_int(rng, 0, max_entry);
    return m;
}

// A plan that is feasible against `state` by construction: each row ships a
// random split of at most the row's vehicle count.
inline RebalancingPlan random_feasible_plan(std::mt19937_64& rng,
                                            const FleetState& state) {
    const int n = state.size();
    RebalancingPlan plan(n);
    for (int i = 0; i < n; ++i) {
        int budget = uniform_int(rng, 0, state[i]);
        while (budget > 0) {
            const int j = uniform_int(rng, 0, n - 1);
            const int c = uniform_int(rng, 1, budget);
            if (j != i) plan.at(i, j) += c;
            budget -= c;  // self-picks burn budget so loops always end
        }
    }
    return plan;
}

}  // namespace rebal::testing

#endif  // REBAL_TESTS_GENERATORS_HPP
