#ifndef REBAL_CORE_HPP
#define REBAL_CORE_HPP

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rebal {

// Region index, 0-based and dense in [0, n_regions).
using RegionId = int;

// Position within the simulated calendar: day number plus slot-of-day.
struct TimeSlot {
    int day = 0;
    int slot = 0;

    auto operator<=>(const TimeSlot&) const = default;

    // Absolute slot index counted from (day 0, slot 0).
    long long absolute(int slots_per_day) const {
        return static_cast<long long>(day) * slots_per_day + slot;
    }
    static TimeSlot from_absolute(long long abs_slot, int slots_per_day) {
        return TimeSlot{static_cast<int>(abs_slot / slots_per_day),
                        static_cast<int>(abs_slot % slots_per_day)};
    }
};

// Vehicles currently stationed per region.
struct FleetState {
    std::vector<int> counts;

    FleetState() = default;
    explicit FleetState(std::vector<int> c) : counts(std::move(c)) {}

    static FleetState filled(int n, int per_region) {
        return FleetState(std::vector<int>(static_cast<size_t>(n), per_region));
    }

    int size() const { return static_cast<int>(counts.size()); }
    int& operator[](RegionId i) { return counts[static_cast<size_t>(i)]; }
    int operator[](RegionId i) const { return counts[static_cast<size_t>(i)]; }

    long long total() const {
        long long t = 0;
        for (int c : counts) t += c;
        return t;
    }

    bool operator==(const FleetState&) const = default;
};

// Origin-destination trip counts for one time slot. Dense n x n, row = origin.
struct DemandMatrix {
    int n = 0;
    std::vector<int> cells;  // row-major

    DemandMatrix() = default;
    explicit DemandMatrix(int regions)
        : n(regions), cells(static_cast<size_t>(regions) * regions, 0) {}

    int& at(RegionId i, RegionId j) { return cells[static_cast<size_t>(i) * n + j]; }
    int at(RegionId i, RegionId j) const { return cells[static_cast<size_t>(i) * n + j]; }

    long long row_sum(RegionId i) const {
        long long s = 0;
        for (int j = 0; j < n; ++j) s += at(i, j);
        return s;
    }
    long long total() const {
        long long s = 0;
        for (int c : cells) s += c;
        return s;
    }

    bool operator==(const DemandMatrix&) const = default;
};

// Inter-region relocation counts applied before a slot begins. moves[i][j] is
// the number of vehicles shipped i -> j. Diagonal entries are meaningless and
// normalized to zero by the constructors in this module.
struct RebalancingPlan {
    int n = 0;
    std::vector<int> moves;  // row-major

    RebalancingPlan() = default;
    explicit RebalancingPlan(int regions)
        : n(regions), moves(static_cast<size_t>(regions) * regions, 0) {}

    int& at(RegionId i, RegionId j) { return moves[static_cast<size_t>(i) * n + j]; }
    int at(RegionId i, RegionId j) const { return moves[static_cast<size_t>(i) * n + j]; }

    long long outbound(RegionId i) const {
        long long s = 0;
        for (int j = 0; j < n; ++j) s += at(i, j);
        return s;
    }
    long long inbound(RegionId j) const {
        long long s = 0;
        for (int i = 0; i < n; ++i) s += at(i, j);
        return s;
    }
    // Vehicles actually relocated (diagonal excluded).
    long long total_moves() const {
        long long s = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) s += at(i, j);
        return s;
    }
    bool is_zero() const {
        for (int m : moves)
            if (m != 0) return false;
        return true;
    }

    bool operator==(const RebalancingPlan&) const = default;
};

// One (from, to, count) relocation, the unit of the plan wire schema.
struct Move {
    RegionId from = 0;
    RegionId to = 0;
    int count = 0;

    bool operator==(const Move&) const = default;
};

enum class ViolationKind {
    MalformedShape,
    NegativeEntry,
    SourceOverdraw,
    ConservationBreak,
    ConstraintBreach,
};

const char* to_string(ViolationKind kind);

struct PlanViolation {
    ViolationKind kind;
    std::string detail;
    std::optional<std::pair<RegionId, RegionId>> location;
};

// Thrown when an operation requires a valid plan and got violations instead.
class PlanError : public std::runtime_error {
public:
    PlanError(std::string message, std::vector<PlanViolation> violations);
    const std::vector<PlanViolation>& violations() const { return violations_; }

private:
    std::vector<PlanViolation> violations_;
};

struct ExperimentConfig {
    int n_regions = 0;
    int slots_per_day = 24;
    int rebalance_period = 12;   // slots between rebalancing decisions
    int horizon = 12;            // slots of predicted demand fed to policies
    double fare_per_trip = 1.0;
    double move_cost = 0.1;
    std::uint64_t rng_seed = 0;

    // Throws std::invalid_argument on a broken configuration.
    void validate() const;
};

// Checks plan shape, entry signs, per-source feasibility against `state`, and
// that the post-apply fleet total equals `total_before`. Reports every
// violation found, in a fixed scan order, so a repair loop sees the full
// defect list in one round trip.
std::vector<PlanViolation> validate_plan(const FleetState& state,
                                         const RebalancingPlan& plan,
                                         long long total_before);

// Executes the plan: result[j] = state[j] - out(j) + in(j). Requires a plan
// with no violations against (state, state.total()); throws PlanError
// otherwise, so a negative count can never be produced.
FleetState apply_plan(const FleetState& state, const RebalancingPlan& plan);

// Builds a plan from a move list. Duplicate (from, to) pairs accumulate,
// self-moves are dropped. Out-of-range indices or negative counts throw
// std::invalid_argument naming the offending move.
RebalancingPlan plan_from_moves(const std::vector<Move>& moves, int n);

// Nonzero off-diagonal plan entries as a move list, ordered by (from, to).
std::vector<Move> plan_to_moves(const RebalancingPlan& plan);

// Canonical wire form {"moves":[{"from":..,"to":..,"count":..}]}, the schema
// the adaptation agent is instructed to emit.
std::string plan_to_json(const RebalancingPlan& plan);

std::string format_violations(const std::vector<PlanViolation>& violations);

// Integer apportionment of `total` units over nonnegative `weights`: floors of
// the exact quotas first, remaining units to the largest fractional parts,
// lower index on ties. Requires sum(weights) > 0; result sums to `total` and,
// when total <= sum(weights), never exceeds the weight entry-wise.
std::vector<int> apportion_largest_remainder(long long total,
                                             const std::vector<long long>& weights);

}  // namespace rebal

#endif  // REBAL_CORE_HPP
