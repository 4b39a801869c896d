// Command-line front end: ingest trip data, run experiments, sweep scenario
// levels, validate plan files, and render adaptation prompts for audit.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rebal/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;   // bad files, bad spec, bad fixture
constexpr int kExitFailure = 2;  // violations found or failed runs

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("file not found: " + path);
    return json::parse(in);
}

int cmd_ingest(const std::string& csv_path, int regions, int slots_per_day,
               const std::string& map_path, const std::string& out_dir) {
    rebal::CsvSchema schema;
    const rebal::RegionMapping mapping =
        map_path.empty() ? rebal::RegionMapping::contiguous(regions)
                         : rebal::RegionMapping::load(map_path);

    rebal::IngestReport report;
    const auto trips = rebal::load_trips(csv_path, schema, mapping, &report);

    rebal::ExperimentConfig cfg;
    cfg.n_regions = regions;
    cfg.slots_per_day = slots_per_day;
    cfg.rebalance_period = slots_per_day;  // irrelevant for bucketing
    const auto series = rebal::build_demand_series(trips, cfg);

    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "demand_series.json")
        << rebal::series_to_json(series) << "\n";
    if (!series.empty()) {
        std::ofstream(fs::path(out_dir) / "stats.json")
            << rebal::stats_to_json(rebal::compute_stats(series)) << "\n";
    }
    std::ofstream(fs::path(out_dir) / "ingest_report.txt") << report.to_text();

    std::cout << report.to_text();
    std::cout << "slots: " << series.size() << ", trips bucketed: "
              << series.total_trips() << "\n";
    return kExitOk;
}

void apply_overrides(rebal::ExperimentSpec& spec, std::uint64_t seed,
                     bool seed_set, const std::string& out,
                     const std::string& adapter) {
    if (seed_set) spec.config.rng_seed = seed;
    if (!out.empty()) spec.output_dir = out;
    if (!adapter.empty()) spec.adapter = adapter;
}

int cmd_run(const std::string& spec_path, std::uint64_t seed, bool seed_set,
            const std::string& out, const std::string& adapter) {
    rebal::ExperimentSpec spec = rebal::ExperimentSpec::load(spec_path);
    apply_overrides(spec, seed, seed_set, out, adapter);

    const auto results = rebal::run_experiment(spec);
    std::cout << results.document.at("aggregate").dump(2) << "\n";
    if (results.failed_runs > 0) {
        std::cerr << results.failed_runs << " run(s) failed\n";
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_sweep(const std::string& spec_path, const std::string& family,
              const std::vector<double>& levels, std::uint64_t seed,
              bool seed_set, const std::string& out, const std::string& adapter) {
    rebal::ExperimentSpec base = rebal::ExperimentSpec::load(spec_path);
    apply_overrides(base, seed, seed_set, out, adapter);

    std::ostringstream combined_csv;
    combined_csv << "scenario,level,arm,seed,metric,value\n";
    json docs = json::array();
    int failed = 0;

    for (double level : levels) {
        rebal::ExperimentSpec spec = base;
        spec.scenario_label = family;
        {
            std::ostringstream lbl;
            lbl << level;
            spec.level_label = lbl.str();
        }
        // Inject at the second decision boundary of the episode's first day.
        rebal::ScenarioEntry entry;
        entry.at = rebal::TimeSlot{spec.episode_start_day, spec.config.rebalance_period};
        entry.seed = spec.config.rng_seed;
        if (family == "rising") {
            entry.kind = rebal::ScenarioKind::RisingDemand;
            entry.ratio = level / 100.0;
        } else if (family == "shrinking") {
            entry.kind = rebal::ScenarioKind::ShrinkingSupply;
            entry.fraction = level / 100.0;
        } else if (family == "goal") {
            entry.kind = rebal::ScenarioKind::DynamicGoal;
            entry.goal.metric = rebal::EquityMetric::EquityVariance;
            entry.goal.weight = level / 100.0;
        } else {
            std::cerr << "unknown scenario family: " << family << "\n";
            return kExitConfig;
        }
        spec.schedule_inline = rebal::ScenarioSchedule({entry}, spec.config.slots_per_day);
        if (!spec.output_dir.empty()) {
            std::ostringstream sub;
            sub << family << "_" << level;
            spec.output_dir = (fs::path(base.output_dir) / sub.str()).string();
        }

        const auto results = rebal::run_experiment(spec);
        failed += results.failed_runs;

        // Merge per-level CSVs, dropping the repeated header.
        std::istringstream rows(results.csv);
        std::string line;
        std::getline(rows, line);
        while (std::getline(rows, line)) combined_csv << line << "\n";

        json doc;
        doc["level"] = level;
        doc["aggregate"] = results.document.at("aggregate");
        docs.push_back(std::move(doc));
    }

    if (!base.output_dir.empty()) {
        fs::create_directories(base.output_dir);
        std::ofstream(fs::path(base.output_dir) / "sweep.csv") << combined_csv.str();
        std::ofstream(fs::path(base.output_dir) / "sweep.json")
            << json{{"scenario", family}, {"levels", docs}}.dump(2) << "\n";
    }
    std::cout << json{{"scenario", family}, {"levels", docs}}.dump(2) << "\n";
    return failed > 0 ? kExitFailure : kExitOk;
}

int cmd_validate_plan(const std::string& plan_path, const std::string& state_path) {
    const json plan_doc = read_json_file(plan_path);
    const json state_doc = read_json_file(state_path);

    const auto counts = state_doc.at("counts").get<std::vector<int>>();
    const rebal::FleetState state(counts);
    const int n = state.size();

    std::vector<rebal::Move> moves;
    for (const auto& m : plan_doc.at("moves")) {
        moves.push_back({m.at("from").get<int>(), m.at("to").get<int>(),
                         m.at("count").get<int>()});
    }

    rebal::RebalancingPlan plan(n);
    for (const auto& m : moves) {
        if (m.from < 0 || m.from >= n || m.to < 0 || m.to >= n) {
            std::cerr << "move (" << m.from << " -> " << m.to
                      << ") is outside [0, " << n << ")\n";
            return kExitFailure;
        }
        if (m.from != m.to) plan.at(m.from, m.to) += m.count;
    }

    const auto violations = rebal::validate_plan(state, plan, state.total());
    if (violations.empty()) {
        std::cout << "plan is valid\n";
        return kExitOk;
    }
    for (const auto& v : violations) {
        std::cout << rebal::to_string(v.kind);
        if (v.location)
            std::cout << " at (" << v.location->first << ", " << v.location->second << ")";
        std::cout << ": " << v.detail << "\n";
    }
    return kExitFailure;
}

int cmd_render_prompt(const std::string& fixture_path) {
    const json doc = read_json_file(fixture_path);

    const auto counts = doc.at("fleet").get<std::vector<int>>();
    const rebal::FleetState state(counts);
    const int n = state.size();

    std::vector<rebal::DemandMatrix> predicted;
    for (const auto& slot : doc.at("predicted")) {
        rebal::DemandMatrix m(n);
        for (const auto& e : slot)
            m.at(e.at(0).get<int>(), e.at(1).get<int>()) = e.at(2).get<int>();
        predicted.push_back(std::move(m));
    }

    rebal::DemandStats stats;
    if (doc.contains("stats")) {
        for (const auto& s : doc.at("stats")) {
            stats.per_region.push_back({s.at("avg").get<double>(),
                                        s.at("std").get<double>(),
                                        s.at("min").get<int>(),
                                        s.at("max").get<int>()});
        }
    } else {
        // Derive descriptive stats from the predicted slots themselves.
        rebal::DemandSeries pseudo(n, 24, rebal::TimeSlot{0, 0});
        for (const auto& m : predicted) pseudo.push_back(m);
        stats = rebal::compute_stats(pseudo);
    }

    std::optional<rebal::RebalancingPlan> initial;
    if (doc.contains("initial")) {
        std::vector<rebal::Move> moves;
        for (const auto& m : doc.at("initial").at("moves"))
            moves.push_back({m.at("from").get<int>(), m.at("to").get<int>(),
                             m.at("count").get<int>()});
        initial = rebal::plan_from_moves(moves, n);
    }

    rebal::EmergentScenario scenario;
    const auto& sc = doc.at("scenario");
    const std::string kind = sc.value("kind", "rising_demand");
    if (kind == "rising_demand") {
        scenario = rebal::surge_scenario(
            sc.value("ratio", 0.5), sc.value("regions", std::vector<int>{}), n,
            sc.value("disclosed", true), sc.value("seed", std::uint64_t{0}));
    } else if (kind == "dynamic_goal") {
        rebal::GoalDescriptor goal;
        const std::string metric = sc.value("metric", "equity_variance");
        goal.metric = metric == "gini"    ? rebal::EquityMetric::Gini
                      : metric == "theil" ? rebal::EquityMetric::Theil
                                          : rebal::EquityMetric::EquityVariance;
        scenario = rebal::dynamic_goal(goal);
    } else if (kind == "narrative") {
        scenario.narrative = sc.at("text").get<std::string>();
    } else {
        std::cerr << "unknown fixture scenario kind: " << kind << "\n";
        return kExitConfig;
    }

    rebal::ExperimentConfig cfg;
    cfg.n_regions = n;
    const rebal::TimeSlot when{doc.value("day", 0), doc.value("slot", 0)};

    const auto prompt =
        rebal::build_prompt(state, predicted, stats, initial, scenario, cfg, when);
    std::cout << prompt.render();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shared-micromobility rebalancing simulation and adaptation harness"};
    app.require_subcommand(1);

    // ingest
    std::string csv_path, map_path, ingest_out = "ingest_out";
    int regions = 77, slots_per_day = 24;
    auto* ingest = app.add_subcommand("ingest", "build a demand-series cache from a trip CSV");
    ingest->add_option("--csv", csv_path, "trip CSV path")->required();
    ingest->add_option("--regions", regions, "number of regions");
    ingest->add_option("--slots-per-day", slots_per_day, "time slots per day");
    ingest->add_option("--map", map_path, "region mapping JSON (label -> id)");
    ingest->add_option("--out", ingest_out, "output directory");

    // run
    std::string run_spec, run_out, run_adapter;
    std::uint64_t run_seed = 0;
    auto* run = app.add_subcommand("run", "run an experiment spec");
    run->add_option("--spec", run_spec, "experiment spec JSON")->required();
    auto* run_seed_opt = run->add_option("--seed", run_seed, "override base seed");
    run->add_option("--out", run_out, "override output directory");
    run->add_option("--adapter", run_adapter, "override adapter (none|mock:<name>|llm)");

    // sweep
    std::string sweep_spec, sweep_family, sweep_out, sweep_adapter;
    std::vector<double> sweep_levels;
    std::uint64_t sweep_seed = 0;
    auto* sweep = app.add_subcommand("sweep", "run a spec across scenario levels");
    sweep->add_option("--spec", sweep_spec, "experiment spec JSON")->required();
    sweep->add_option("--scenario", sweep_family, "rising|shrinking|goal")->required();
    sweep->add_option("--levels", sweep_levels, "levels in percent, e.g. 20 50 80 100")
        ->required();
    auto* sweep_seed_opt = sweep->add_option("--seed", sweep_seed, "override base seed");
    sweep->add_option("--out", sweep_out, "override output directory");
    sweep->add_option("--adapter", sweep_adapter, "override adapter");

    // validate-plan
    std::string vp_plan, vp_state;
    auto* vp = app.add_subcommand("validate-plan", "check a plan file against a fleet state");
    vp->add_option("--plan", vp_plan, "plan JSON ({\"moves\": [...]})")->required();
    vp->add_option("--state", vp_state, "state JSON ({\"counts\": [...]})")->required();

    // render-prompt
    std::string rp_fixture;
    auto* rp = app.add_subcommand("render-prompt", "print the adaptation prompt for a fixture");
    rp->add_option("--fixture", rp_fixture, "fixture JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed())
            return cmd_ingest(csv_path, regions, slots_per_day, map_path, ingest_out);
        if (run->parsed())
            return cmd_run(run_spec, run_seed, !run_seed_opt->empty(), run_out, run_adapter);
        if (sweep->parsed())
            return cmd_sweep(sweep_spec, sweep_family, sweep_levels, sweep_seed,
                             !sweep_seed_opt->empty(), sweep_out, sweep_adapter);
        if (vp->parsed()) return cmd_validate_plan(vp_plan, vp_state);
        if (rp->parsed()) return cmd_render_prompt(rp_fixture);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
