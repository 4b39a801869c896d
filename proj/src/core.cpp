#include "rebal/core.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rebal {

const char* to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::MalformedShape: return "MalformedShape";
        case ViolationKind::NegativeEntry: return "NegativeEntry";
        case ViolationKind::SourceOverdraw: return "SourceOverdraw";
        case ViolationKind::ConservationBreak: return "ConservationBreak";
        case ViolationKind::ConstraintBreach: return "ConstraintBreach";
    }
    return "Unknown";
}

PlanError::PlanError(std::string message, std::vector<PlanViolation> violations)
    : std::runtime_error(std::move(message)), violations_(std::move(violations)) {}

void ExperimentConfig::validate() const {
    if (n_regions < 1) throw std::invalid_argument("config: n_regions must be >= 1");
    if (slots_per_day < 1) throw std::invalid_argument("config: slots_per_day must be >= 1");
    if (rebalance_period < 1 || slots_per_day % rebalance_period != 0)
        throw std::invalid_argument("config: rebalance_period must divide slots_per_day");
    if (horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
    if (fare_per_trip < 0) throw std::invalid_argument("config: fare_per_trip must be >= 0");
    if (move_cost < 0) throw std::invalid_argument("config: move_cost must be >= 0");
}

std::vector<PlanViolation> validate_plan(const FleetState& state,
                                         const RebalancingPlan& plan,
                                         long long total_before) {
    std::vector<PlanViolation> out;
    const int n = state.size();

    if (plan.n != n || plan.moves.size() != static_cast<size_t>(plan.n) * plan.n) {
        std::ostringstream msg;
        msg << "plan shape is " << plan.n << "x" << plan.n << " with "
            << plan.moves.size() << " entries, expected " << n << "x" << n;
        out.push_back({ViolationKind::MalformedShape, msg.str(), std::nullopt});
        return out;  // entry-wise checks need a well-shaped matrix
    }

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (plan.at(i, j) < 0) {
                std::ostringstream msg;
                msg << "moves[" << i << "][" << j << "] = " << plan.at(i, j)
                    << " is negative";
                out.push_back({ViolationKind::NegativeEntry, msg.str(),
                               std::make_pair(i, j)});
            }
        }
    }

    for (int i = 0; i < n; ++i) {
        const long long outbound = plan.outbound(i);
        if (outbound > state[i]) {
            // Locate the violation at the largest contributing move (lowest
            // destination index on ties) so the report points somewhere useful.
            RegionId worst = 0;
            int worst_count = -1;
            for (int j = 0; j < n; ++j) {
                if (plan.at(i, j) > worst_count) {
                    worst_count = plan.at(i, j);
                    worst = j;
                }
            }
            std::ostringstream msg;
            msg << "region " << i << " ships " << outbound << " vehicles but only "
                << state[i] << " are available";
            out.push_back({ViolationKind::SourceOverdraw, msg.str(),
                           std::make_pair(i, worst)});
        }
    }

    // Moves subtract from the source and add to the destination, so the
    // post-apply total is exactly state.total(); the check catches a stale
    // reference total (e.g. a plan drafted before a supply shock).
    const long long total_after = state.total();
    if (total_after != total_before) {
        std::ostringstream msg;
        msg << "post-apply fleet total " << total_after
            << " does not match the required total " << total_before;
        out.push_back({ViolationKind::ConservationBreak, msg.str(), std::nullopt});
    }

    return out;
}

FleetState apply_plan(const FleetState& state, const RebalancingPlan& plan) {
    auto violations = validate_plan(state, plan, state.total());
    if (!violations.empty()) {
        throw PlanError("apply_plan: plan failed validation: " +
                            format_violations(violations),
                        std::move(violations));
    }
    FleetState result = state;
    const int n = state.size();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const int c = plan.at(i, j);
            result[i] -= c;
            result[j] += c;
        }
    }
    return result;
}

RebalancingPlan plan_from_moves(const std::vector<Move>& moves, int n) {
    if (n < 1) throw std::invalid_argument("plan_from_moves: n must be >= 1");
    RebalancingPlan plan(n);
    for (size_t k = 0; k < moves.size(); ++k) {
        const Move& m = moves[k];
        if (m.from < 0 || m.from >= n || m.to < 0 || m.to >= n) {
            std::ostringstream msg;
            msg << "plan_from_moves: move " << k << " (" << m.from << " -> " << m.to
                << ", count " << m.count << ") has a region index outside [0, " << n
                << ")";
            throw std::invalid_argument(msg.str());
        }
        if (m.count < 0) {
            std::ostringstream msg;
            msg << "plan_from_moves: move " << k << " (" << m.from << " -> " << m.to
                << ") has negative count " << m.count;
            throw std::invalid_argument(msg.str());
        }
        if (m.from == m.to) continue;  // self-moves are dropped
        plan.at(m.from, m.to) += m.count;
    }
    return plan;
}

std::vector<Move> plan_to_moves(const RebalancingPlan& plan) {
    std::vector<Move> out;
    for (int i = 0; i < plan.n; ++i)
        for (int j = 0; j < plan.n; ++j)
            if (i != j && plan.at(i, j) != 0) out.push_back({i, j, plan.at(i, j)});
    return out;
}

std::string plan_to_json(const RebalancingPlan& plan) {
    nlohmann::json moves = nlohmann::json::array();
    for (const Move& m : plan_to_moves(plan)) {
        moves.push_back({{"from", m.from}, {"to", m.to}, {"count", m.count}});
    }
    return nlohmann::json{{"moves", moves}}.dump();
}

std::vector<int> apportion_largest_remainder(long long total,
                                             const std::vector<long long>& weights) {
    const size_t n = weights.size();
    long long wsum = 0;
    for (long long w : weights) {
        if (w < 0) throw std::invalid_argument("apportion: negative weight");
        wsum += w;
    }
    if (total < 0) throw std::invalid_argument("apportion: negative total");
    if (wsum == 0) throw std::invalid_argument("apportion: weights sum to zero");

    std::vector<int> out(n, 0);
    std::vector<std::pair<long long, size_t>> remainders;  // (-remainder, index)
    long long assigned = 0;
    for (size_t i = 0; i < n; ++i) {
        const long long quota_num = total * weights[i];
        out[i] = static_cast<int>(quota_num / wsum);
        assigned += out[i];
        remainders.push_back({-(quota_num % wsum), i});
    }
    std::sort(remainders.begin(), remainders.end());
    for (long long left = total - assigned, k = 0; left > 0; --left, ++k) {
        out[remainders[static_cast<size_t>(k)].second] += 1;
    }
    return out;
}

std::string format_violations(const std::vector<PlanViolation>& violations) {
    std::ostringstream out;
    for (size_t i = 0; i < violations.size(); ++i) {
        if (i) out << "; ";
        out << to_string(violations[i].kind);
        if (violations[i].location) {
            out << " at (" << violations[i].location->first << ", "
                << violations[i].location->second << ")";
        }
        out << ": " << violations[i].detail;
    }
    return out.str();
}

}  // namespace rebal
