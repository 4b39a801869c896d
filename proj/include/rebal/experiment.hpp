#ifndef REBAL_EXPERIMENT_HPP
#define REBAL_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rebal/adaptation.hpp"
#include "rebal/metrics.hpp"
#include "rebal/simulator.hpp"

namespace rebal {

class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SyntheticSource {
    int regions = 6;
    int slots = 48;
    double intensity = 0.8;
    std::uint64_t seed = 1;
};

struct CsvSource {
    std::string path;
    CsvSchema schema;
    std::string region_map;  // optional mapping file; contiguous 1..N otherwise
    int regions = 77;
};

enum class FleetInitMode { Uniform, ProportionalToDemand };

struct FleetInit {
    FleetInitMode mode = FleetInitMode::ProportionalToDemand;
    long long total = 0;  // 0: one vehicle per mean slot-demand unit, see resolve
};

// Everything one batch experiment needs; loads from a JSON config file.
struct ExperimentSpec {
    ExperimentConfig config;
    std::optional<CsvSource> csv;
    SyntheticSource synthetic;  // used when csv is absent
    FleetInit fleet;
    RebalancerKind rebalancer = RebalancerKind::SDSM;
    GAConfig ga;
    PredictorMode predictor = PredictorMode::PerfectForesight;
    std::string adapter = "none";  // none | mock:<name> | llm
    LlmAdapterConfig llm;
    std::string scenario_script;   // path to a schedule file; may be empty
    std::optional<ScenarioSchedule> schedule_inline;
    int repetitions = 1;
    std::string output_dir;
    int episode_start_day = 0;
    int episode_days = -1;         // -1: through the series end
    int max_reflection_iterations = 10;
    int workers = 1;
    std::string scenario_label;    // CSV annotation, filled by sweep
    std::string level_label;

    static ExperimentSpec load(const std::string& path);
    static ExperimentSpec parse(const nlohmann::json& doc);

    // Full resolved spec embedded in the results document for audit.
    nlohmann::json resolved() const;
};

struct RunRow {
    std::uint64_t seed = 0;
    std::string arm;  // "baseline" | "adapted"
    bool failed = false;
    std::string failure;
    MetricsReport metrics;
    std::uint64_t trace_hash = 0;
    long long total_satisfied = 0;
    long long total_demand = 0;
    int adaptations_valid = 0;
    int adaptations_fellback = 0;
};

struct ExperimentResults {
    nlohmann::json document;  // machine-readable results with embedded spec
    std::string csv;          // flat rows: scenario,level,arm,seed,metric,value
    std::vector<RunRow> rows;
    int failed_runs = 0;
};

// Runs `repetitions` paired (baseline, adapted) episodes on identical seeds
// and aggregates mean +/- std per arm. Mock adapters make the whole document
// byte-reproducible. Transcripts are written under output_dir when set.
ExperimentResults run_experiment(const ExperimentSpec& spec);

}  // namespace rebal

#endif  // REBAL_EXPERIMENT_HPP
