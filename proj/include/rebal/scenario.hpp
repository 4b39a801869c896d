#ifndef REBAL_SCENARIO_HPP
#define REBAL_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rebal/core.hpp"
#include "rebal/ingest.hpp"

namespace rebal {

enum class ScenarioKind {
    RisingDemand,
    ShrinkingSupply,
    DynamicGoal,
};

const char* to_string(ScenarioKind kind);

enum class EquityMetric {
    EquityVariance,
    Gini,
    Theil,
};

const char* to_string(EquityMetric metric);

// A regulator-imposed objective delivered alongside (or instead of) the
// operator's revenue goal.
struct GoalDescriptor {
    EquityMetric metric = EquityMetric::EquityVariance;
    bool maximize = true;       // direction for the signed metric value
    double weight = 0.5;        // weight vs. revenue, in [0, 1]
};

// A typed perturbation plus the natural-language rendering handed to the
// adaptation agent. Only the fields matching `kind` are populated.
struct EmergentScenario {
    ScenarioKind kind = ScenarioKind::RisingDemand;
    // RisingDemand: per-region demand scaling (1 + ratio) for affected origins.
    std::optional<double> demand_ratio;
    std::vector<RegionId> affected_regions;   // empty = all regions
    // ShrinkingSupply: vehicles removed per region.
    std::optional<std::vector<int>> supply_delta;
    // DynamicGoal.
    std::optional<GoalDescriptor> constraint;
    bool magnitude_disclosed = true;
    std::string narrative;
    std::uint64_t seed = 0;
};

// Narrative phrasing pools. The library ships defaults; a data file can
// override them so new phrasings need no code change.
struct TemplatePool {
    std::vector<std::string> latent_surge;     // "{region}" placeholder
    std::vector<std::string> disclosed_surge;  // "{region}" and "{pct}" placeholders
    std::vector<std::string> maintenance;      // "{count}" and "{region}" placeholders

    static TemplatePool defaults();
    static TemplatePool load(const std::string& path);
};

// Typed surge descriptor plus narrative, without touching any series. When
// `disclosed` the narrative states the exact per-region percentage; otherwise
// it gives only a qualitative signal with no numeric ratio.
EmergentScenario surge_scenario(double ratio, const std::vector<RegionId>& regions,
                                int n_regions, bool disclosed, std::uint64_t seed,
                                const TemplatePool& templates = TemplatePool::defaults());

// Scales entries with an affected origin by (1 + ratio), rounding half-up.
std::pair<DemandSeries, EmergentScenario> rising_demand(
    const DemandSeries& series, double ratio,
    const std::vector<RegionId>& regions, bool disclosed, std::uint64_t seed,
    const TemplatePool& templates = TemplatePool::defaults());

// Removes round(fraction * total) vehicles sampled uniformly over the
// stationed vehicles (not over regions). Per-region removals land in
// supply_delta; the narrative names the affected regions.
std::pair<FleetState, EmergentScenario> shrinking_supply(
    const FleetState& state, double fraction, std::uint64_t seed,
    const TemplatePool& templates = TemplatePool::defaults());

// Renders the goal in regulator phrasing, naming the metric.
EmergentScenario dynamic_goal(const GoalDescriptor& goal);

// One scheduled injection. ShrinkingSupply draws its removals at the
// injection slot; the other kinds carry their parameters here.
struct ScenarioEntry {
    TimeSlot at;
    ScenarioKind kind = ScenarioKind::RisingDemand;
    double ratio = 0.0;                     // RisingDemand
    std::vector<RegionId> regions;          // RisingDemand; empty = all
    double fraction = 0.0;                  // ShrinkingSupply
    GoalDescriptor goal;                    // DynamicGoal
    bool disclosed = true;
    std::uint64_t seed = 0;
};

class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Immutable, validated injection schedule for one episode.
class ScenarioSchedule {
public:
    ScenarioSchedule() = default;
    // Throws ScheduleError on unsorted slots or same-slot same-kind overlap.
    explicit ScenarioSchedule(std::vector<ScenarioEntry> entries, int slots_per_day = 24);

    static ScenarioSchedule load(const std::string& path, int slots_per_day = 24);
    static ScenarioSchedule parse(const std::string& json_text, int slots_per_day = 24);

    const std::vector<ScenarioEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

private:
    std::vector<ScenarioEntry> entries_;
};

// Helper shared by the scenario generator and the episode runner: scales the
// affected origins' rows of `m` by (1 + ratio) with half-up rounding.
void scale_demand_rows(DemandMatrix& m, double ratio,
                       const std::vector<RegionId>& regions);

}  // namespace rebal

#endif  // REBAL_SCENARIO_HPP
