#include "rebal/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rebal {

namespace {

std::string replace_all(std::string text, const std::string& token,
                        const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
    return text;
}

// Percentage rendering: integer when whole, else one decimal ("12.5%").
std::string format_pct(double ratio) {
    const double pct = ratio * 100.0;
    const double rounded = std::round(pct);
    std::ostringstream out;
    if (std::abs(pct - rounded) < 1e-9) {
        out << static_cast<long long>(rounded) << "%";
    } else {
        out.setf(std::ios::fixed);
        out.precision(1);
        out << pct << "%";
    }
    return out.str();
}

const std::string& pick(const std::vector<std::string>& pool, std::mt19937_64& rng) {
    return pool[static_cast<size_t>(rng() % pool.size())];
}

}  // namespace

const char* to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::RisingDemand: return "rising_demand";
        case ScenarioKind::ShrinkingSupply: return "shrinking_supply";
        case ScenarioKind::DynamicGoal: return "dynamic_goal";
    }
    return "unknown";
}

const char* to_string(EquityMetric metric) {
    switch (metric) {
        case EquityMetric::EquityVariance: return "equity_variance";
        case EquityMetric::Gini: return "gini";
        case EquityMetric::Theil: return "theil";
    }
    return "unknown";
}

TemplatePool TemplatePool::defaults() {
    TemplatePool p;
    p.latent_surge = {
        "Field reports: a large crowd is forming near Region {region}; expect "
        "unusually heavy trip demand starting there.",
        "Event staff report dense foot traffic around Region {region}; trip "
        "requests from that area are likely to spike soon.",
        "Transit feeds show severe crowding near Region {region}; anticipate "
        "elevated outbound trip demand in the area.",
    };
    p.disclosed_surge = {
        "Early-warning telemetry: trip demand originating in Region {region} is "
        "rising by {pct} this period.",
        "Sensor feeds confirm a demand surge in Region {region}: outbound trip "
        "requests are up by {pct}.",
    };
    p.maintenance = {
        "Operations notice: {count} vehicles in Region {region} are under "
        "maintenance and unavailable for service.",
        "Depot report: {count} vehicles stationed in Region {region} have been "
        "pulled from service for repairs.",
    };
    return p;
}

TemplatePool TemplatePool::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("template pool file not found: " + path);
    const nlohmann::json doc = nlohmann::json::parse(in);
    TemplatePool p = defaults();
    if (doc.contains("latent_surge"))
        p.latent_surge = doc.at("latent_surge").get<std::vector<std::string>>();
    if (doc.contains("disclosed_surge"))
        p.disclosed_surge = doc.at("disclosed_surge").get<std::vector<std::string>>();
    if (doc.contains("maintenance"))
        p.maintenance = doc.at("maintenance").get<std::vector<std::string>>();
    if (p.latent_surge.empty() || p.disclosed_surge.empty() || p.maintenance.empty())
        throw std::runtime_error("template pool must keep every phrasing family non-empty");
    return p;
}

void scale_demand_rows(DemandMatrix& m, double ratio,
                       const std::vector<RegionId>& regions) {
    const auto affected = [&](RegionId i) {
        return regions.empty() ||
               std::find(regions.begin(), regions.end(), i) != regions.end();
    };
    for (int i = 0; i < m.n; ++i) {
        if (!affected(i)) continue;
        for (int j = 0; j < m.n; ++j) {
            const double scaled = m.at(i, j) * (1.0 + ratio);
            m.at(i, j) = static_cast<int>(std::floor(scaled + 0.5));
        }
    }
}

EmergentScenario surge_scenario(double ratio, const std::vector<RegionId>& regions,
                                int n_regions, bool disclosed, std::uint64_t seed,
                                const TemplatePool& templates) {
    if (!(ratio > 0.0))
        throw std::invalid_argument("surge_scenario: ratio must be > 0");

    std::vector<RegionId> named = regions;
    if (named.empty()) {
        named.resize(static_cast<size_t>(n_regions));
        std::iota(named.begin(), named.end(), 0);
    }

    std::mt19937_64 rng(seed);
    std::ostringstream narrative;
    for (size_t k = 0; k < named.size(); ++k) {
        if (k) narrative << " ";
        if (disclosed) {
            std::string line = pick(templates.disclosed_surge, rng);
            line = replace_all(line, "{region}", std::to_string(named[k]));
            line = replace_all(line, "{pct}", format_pct(ratio));
            narrative << line;
        } else {
            std::string line = pick(templates.latent_surge, rng);
            narrative << replace_all(line, "{region}", std::to_string(named[k]));
        }
    }

    EmergentScenario scenario;
    scenario.kind = ScenarioKind::RisingDemand;
    scenario.demand_ratio = ratio;
    scenario.affected_regions = regions;
    scenario.magnitude_disclosed = disclosed;
    scenario.narrative = narrative.str();
    scenario.seed = seed;
    return scenario;
}

std::pair<DemandSeries, EmergentScenario> rising_demand(
    const DemandSeries& series, double ratio, const std::vector<RegionId>& regions,
    bool disclosed, std::uint64_t seed, const TemplatePool& templates) {
    EmergentScenario scenario =
        surge_scenario(ratio, regions, series.regions(), disclosed, seed, templates);

    DemandSeries scaled = series;
    for (int s = 0; s < scaled.size(); ++s)
        scale_demand_rows(scaled.at_index(s), ratio, regions);

    return {std::move(scaled), std::move(scenario)};
}

std::pair<FleetState, EmergentScenario> shrinking_supply(
    const FleetState& state, double fraction, std::uint64_t seed,
    const TemplatePool& templates) {
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw std::invalid_argument("shrinking_supply: fraction must be in (0, 1)");

    const long long total = state.total();
    const long long to_remove = std::llround(fraction * static_cast<double>(total));

    // Sample vehicles, not regions: pick k distinct positions in the flattened
    // fleet via a partial Fisher-Yates shuffle.
    std::vector<RegionId> region_of;
    region_of.reserve(static_cast<size_t>(total));
    for (RegionId i = 0; i < state.size(); ++i)
        for (int c = 0; c < state[i]; ++c) region_of.push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<int> removed(static_cast<size_t>(state.size()), 0);
    for (long long k = 0; k < to_remove && k < total; ++k) {
        const long long pick_at =
            k + static_cast<long long>(rng() % static_cast<std::uint64_t>(total - k));
        std::swap(region_of[static_cast<size_t>(k)],
                  region_of[static_cast<size_t>(pick_at)]);
        removed[static_cast<size_t>(region_of[static_cast<size_t>(k)])] += 1;
    }

    FleetState after = state;
    for (RegionId i = 0; i < state.size(); ++i) after[i] -= removed[static_cast<size_t>(i)];

    std::ostringstream narrative;
    bool first = true;
    for (RegionId i = 0; i < state.size(); ++i) {
        if (removed[static_cast<size_t>(i)] == 0) continue;
        if (!first) narrative << " ";
        first = false;
        std::string line = pick(templates.maintenance, rng);
        line = replace_all(line, "{count}", std::to_string(removed[static_cast<size_t>(i)]));
        line = replace_all(line, "{region}", std::to_string(i));
        narrative << line;
    }
    if (first) narrative << "Operations notice: no vehicles affected this period.";

    EmergentScenario scenario;
    scenario.kind = ScenarioKind::ShrinkingSupply;
    scenario.supply_delta = removed;
    scenario.magnitude_disclosed = true;
    scenario.narrative = narrative.str();
    scenario.seed = seed;
    return {std::move(after), std::move(scenario)};
}

EmergentScenario dynamic_goal(const GoalDescriptor& goal) {
    std::ostringstream narrative;
    narrative << "City regulator directive: ";
    switch (goal.metric) {
        case EquityMetric::EquityVariance:
            narrative << "improve vehicle deployment equity across all regions by "
                         "keeping each region's demand-supply ratio close to the "
                         "city-wide demand-supply ratio.";
            break;
        case EquityMetric::Gini:
            narrative << "improve vehicle deployment equity across all regions by "
                         "reducing the Gini coefficient of the per-region "
                         "demand-supply ratios.";
            break;
        case EquityMetric::Theil:
            narrative << "improve vehicle deployment equity across all regions by "
                         "reducing the Theil index of the per-region demand-supply "
                         "ratios.";
            break;
    }
    narrative << " This goal carries weight " << goal.weight
              << " relative to net revenue.";

    EmergentScenario scenario;
    scenario.kind = ScenarioKind::DynamicGoal;
    scenario.constraint = goal;
    scenario.magnitude_disclosed = true;
    scenario.narrative = narrative.str();
    return scenario;
}

ScenarioSchedule::ScenarioSchedule(std::vector<ScenarioEntry> entries,
                                   int slots_per_day) {
    for (size_t k = 1; k < entries.size(); ++k) {
        const auto prev = entries[k - 1].at.absolute(slots_per_day);
        const auto cur = entries[k].at.absolute(slots_per_day);
        if (cur < prev)
            throw ScheduleError("scenario schedule slots must be non-decreasing");
        if (cur == prev && entries[k].kind == entries[k - 1].kind) {
            std::ostringstream msg;
            msg << "duplicate " << to_string(entries[k].kind)
                << " entry at day " << entries[k].at.day << " slot "
                << entries[k].at.slot;
            throw ScheduleError(msg.str());
        }
    }
    entries_ = std::move(entries);
}

ScenarioSchedule ScenarioSchedule::parse(const std::string& json_text,
                                         int slots_per_day) {
    const nlohmann::json doc = nlohmann::json::parse(json_text);
    std::vector<ScenarioEntry> entries;
    for (const auto& item : doc) {
        ScenarioEntry e;
        if (item.contains("day")) e.at.day = item.at("day").get<int>();
        e.at.slot = item.at("slot").get<int>();
        const std::string kind = item.at("kind").get<std::string>();
        if (kind == "rising_demand") {
            e.kind = ScenarioKind::RisingDemand;
            e.ratio = item.at("ratio").get<double>();
            if (item.contains("regions"))
                e.regions = item.at("regions").get<std::vector<RegionId>>();
        } else if (kind == "shrinking_supply") {
            e.kind = ScenarioKind::ShrinkingSupply;
            e.fraction = item.at("fraction").get<double>();
        } else if (kind == "dynamic_goal") {
            e.kind = ScenarioKind::DynamicGoal;
            const std::string metric = item.value("metric", "equity_variance");
            if (metric == "gini") e.goal.metric = EquityMetric::Gini;
            else if (metric == "theil") e.goal.metric = EquityMetric::Theil;
            else if (metric == "equity_variance") e.goal.metric = EquityMetric::EquityVariance;
            else throw ScheduleError("unknown equity metric: " + metric);
            e.goal.weight = item.value("weight", 0.5);
        } else {
            throw ScheduleError("unknown scenario kind: " + kind);
        }
        e.disclosed = item.value("disclosed", true);
        e.seed = item.value("seed", std::uint64_t{0});
        entries.push_back(std::move(e));
    }
    return ScenarioSchedule(std::move(entries), slots_per_day);
}

ScenarioSchedule ScenarioSchedule::load(const std::string& path, int slots_per_day) {
    std::ifstream in(path);
    if (!in) throw ScheduleError("scenario script not found: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), slots_per_day);
}

}  // namespace rebal
