#include "rebal/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace rebal {

namespace {

FleetInitMode fleet_mode_from_string(const std::string& name) {
    if (name == "uniform") return FleetInitMode::Uniform;
    if (name == "proportional") return FleetInitMode::ProportionalToDemand;
    throw SpecError("unknown fleet init mode: " + name);
}

const char* to_string(FleetInitMode mode) {
    return mode == FleetInitMode::Uniform ? "uniform" : "proportional";
}

PredictorMode predictor_from_string(const std::string& name) {
    if (name == "historical_average") return PredictorMode::HistoricalAverage;
    if (name == "perfect_foresight") return PredictorMode::PerfectForesight;
    throw SpecError("unknown predictor mode: " + name);
}

}  // namespace

ExperimentSpec ExperimentSpec::parse(const nlohmann::json& doc) {
    ExperimentSpec spec;

    const auto& cfg = doc.at("config");
    spec.config.n_regions = cfg.at("n_regions").get<int>();
    spec.config.slots_per_day = cfg.value("slots_per_day", 24);
    spec.config.rebalance_period = cfg.value("rebalance_period", 12);
    spec.config.horizon = cfg.value("horizon", 12);
    spec.config.fare_per_trip = cfg.value("fare_per_trip", 1.0);
    spec.config.move_cost = cfg.value("move_cost", 0.1);
    spec.config.rng_seed = cfg.value("rng_seed", std::uint64_t{1});
    spec.config.validate();

    if (doc.contains("data")) {
        const auto& data = doc.at("data");
        if (data.contains("csv")) {
            CsvSource csv;
            csv.path = data.at("csv").at("path").get<std::string>();
            const auto& c = data.at("csv");
            if (c.contains("timestamp_column"))
                csv.schema.timestamp = c.at("timestamp_column").get<std::string>();
            if (c.contains("start_column"))
                csv.schema.start_region = c.at("start_column").get<std::string>();
            if (c.contains("end_column"))
                csv.schema.end_region = c.at("end_column").get<std::string>();
            csv.region_map = c.value("region_map", "");
            csv.regions = c.value("regions", spec.config.n_regions);
            spec.csv = std::move(csv);
        } else if (data.contains("synthetic")) {
            const auto& s = data.at("synthetic");
            spec.synthetic.regions = s.value("regions", spec.config.n_regions);
            spec.synthetic.slots = s.value("slots", 2 * spec.config.slots_per_day);
            spec.synthetic.intensity = s.value("intensity", 0.8);
            spec.synthetic.seed = s.value("seed", std::uint64_t{1});
        } else {
            throw SpecError("data section needs either \"csv\" or \"synthetic\"");
        }
    } else {
        spec.synthetic.regions = spec.config.n_regions;
        spec.synthetic.slots = 2 * spec.config.slots_per_day;
    }

    if (doc.contains("fleet")) {
        spec.fleet.total = doc.at("fleet").value("total", 0LL);
        spec.fleet.mode =
            fleet_mode_from_string(doc.at("fleet").value("init", "proportional"));
    }

    if (doc.contains("rebalancer")) {
        const auto& r = doc.at("rebalancer");
        spec.rebalancer = rebalancer_kind_from_string(r.value("kind", "sdsm"));
        if (r.contains("ga")) {
            const auto& g = r.at("ga");
            spec.ga.population_size = g.value("population_size", 50);
            spec.ga.generations = g.value("generations", 100);
            spec.ga.mutation_rate = g.value("mutation_rate", 0.1);
            spec.ga.crossover_rate = g.value("crossover_rate", 0.9);
            spec.ga.elite_count = g.value("elite_count", 2);
            spec.ga.seed = g.value("seed", std::uint64_t{0});
            spec.ga.validate();
        }
    }

    spec.predictor =
        predictor_from_string(doc.value("predictor", "perfect_foresight"));
    spec.adapter = doc.value("adapter", "none");
    if (doc.contains("llm")) {
        const auto& l = doc.at("llm");
        spec.llm.endpoint = l.value("endpoint", spec.llm.endpoint);
        spec.llm.model = l.value("model", spec.llm.model);
        spec.llm.temperature = l.value("temperature", spec.llm.temperature);
        spec.llm.timeout_seconds = l.value("timeout_seconds", spec.llm.timeout_seconds);
        spec.llm.max_retries = l.value("max_retries", spec.llm.max_retries);
        spec.llm.credential_env = l.value("credential_env", spec.llm.credential_env);
        spec.llm.max_in_flight = l.value("max_in_flight", spec.llm.max_in_flight);
    }

    spec.scenario_script = doc.value("scenario_script", "");
    if (doc.contains("scenarios")) {
        spec.schedule_inline = ScenarioSchedule::parse(doc.at("scenarios").dump(),
                                                       spec.config.slots_per_day);
    }

    spec.repetitions = doc.value("repetitions", 1);
    if (spec.repetitions < 1) throw SpecError("repetitions must be >= 1");
    spec.output_dir = doc.value("output_dir", "");
    spec.episode_start_day = doc.value("episode_start_day", 0);
    spec.episode_days = doc.value("episode_days", -1);
    spec.max_reflection_iterations = doc.value("max_reflection_iterations", 10);
    spec.workers = std::max(1, doc.value("workers", 1));
    return spec;
}

ExperimentSpec ExperimentSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("experiment spec not found: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError("experiment spec is not valid JSON: " + std::string(e.what()));
    }
    ExperimentSpec spec = parse(doc);
    if (!spec.scenario_script.empty() &&
        !std::filesystem::exists(spec.scenario_script))
        throw SpecError("scenario script not found: " + spec.scenario_script);
    if (spec.csv && !std::filesystem::exists(spec.csv->path))
        throw SpecError("trip csv not found: " + spec.csv->path);
    return spec;
}

nlohmann::json ExperimentSpec::resolved() const {
    nlohmann::json doc;
    doc["config"] = {{"n_regions", config.n_regions},
                     {"slots_per_day", config.slots_per_day},
                     {"rebalance_period", config.rebalance_period},
                     {"horizon", config.horizon},
                     {"fare_per_trip", config.fare_per_trip},
                     {"move_cost", config.move_cost},
                     {"rng_seed", config.rng_seed}};
    if (csv) {
        doc["data"]["csv"] = {{"path", csv->path},
                              {"regions", csv->regions},
                              {"region_map", csv->region_map}};
    } else {
        doc["data"]["synthetic"] = {{"regions", synthetic.regions},
                                    {"slots", synthetic.slots},
                                    {"intensity", synthetic.intensity},
                                    {"seed", synthetic.seed}};
    }
    doc["fleet"] = {{"total", fleet.total}, {"init", to_string(fleet.mode)}};
    doc["rebalancer"] = {{"kind", to_string(rebalancer)},
                         {"ga",
                          {{"population_size", ga.population_size},
                           {"generations", ga.generations},
                           {"mutation_rate", ga.mutation_rate},
                           {"crossover_rate", ga.crossover_rate},
                           {"elite_count", ga.elite_count},
                           {"seed", ga.seed}}}};
    doc["predictor"] = to_string(predictor);
    doc["adapter"] = adapter;
    doc["scenario_script"] = scenario_script;
    doc["repetitions"] = repetitions;
    doc["episode_start_day"] = episode_start_day;
    doc["episode_days"] = episode_days;
    doc["max_reflection_iterations"] = max_reflection_iterations;
    return doc;
}

namespace {

struct World {
    DemandSeries series;
    FleetState initial;
    ScenarioSchedule schedule;
};

ScenarioSchedule reseed(const ScenarioSchedule& schedule, std::uint64_t rep,
                        int slots_per_day) {
    std::vector<ScenarioEntry> entries = schedule.entries();
    for (size_t k = 0; k < entries.size(); ++k) {
        entries[k].seed = entries[k].seed + rep * 7919 + k;  // distinct per rep
    }
    return ScenarioSchedule(std::move(entries), slots_per_day);
}

FleetState build_fleet(const DemandSeries& series, const FleetInit& init) {
    const int n = series.regions();
    long long total = init.total;
    if (total == 0) {
        // One vehicle per mean slot of outbound demand, at least one per region.
        total = std::max<long long>(series.total_trips() / std::max(1, series.size()),
                                    n);
    }
    std::vector<long long> weights(static_cast<size_t>(n), 1);
    if (init.mode == FleetInitMode::ProportionalToDemand) {
        bool any = false;
        std::vector<long long> demand(static_cast<size_t>(n), 0);
        for (int s = 0; s < series.size(); ++s)
            for (int i = 0; i < n; ++i) demand[static_cast<size_t>(i)] += series.at_index(s).row_sum(i);
        for (long long d : demand) any = any || d > 0;
        if (any) weights = std::move(demand);
    }
    return FleetState(apportion_largest_remainder(total, weights));
}

World build_world(const ExperimentSpec& spec, std::uint64_t rep) {
    World world;
    if (spec.csv) {
        const RegionMapping mapping =
            spec.csv->region_map.empty()
                ? RegionMapping::contiguous(spec.csv->regions)
                : RegionMapping::load(spec.csv->region_map);
        const auto trips = load_trips(spec.csv->path, spec.csv->schema, mapping);
        world.series = build_demand_series(trips, spec.config);
    } else {
        world.series =
            generate_synthetic(spec.synthetic.regions, spec.synthetic.slots,
                               spec.synthetic.intensity, spec.synthetic.seed + rep,
                               spec.config.slots_per_day);
    }

    world.initial = build_fleet(world.series, spec.fleet);

    ScenarioSchedule schedule;
    if (spec.schedule_inline) {
        schedule = *spec.schedule_inline;
    } else if (!spec.scenario_script.empty()) {
        schedule = ScenarioSchedule::load(spec.scenario_script, spec.config.slots_per_day);
    }
    world.schedule = reseed(schedule, rep, spec.config.slots_per_day);
    return world;
}

RunRow run_arm(const ExperimentSpec& spec, const World& world,
               std::uint64_t seed, const std::string& arm, Adapter* adapter,
               std::vector<AdaptationTranscript>* transcripts) {
    RunRow row;
    row.seed = seed;
    row.arm = arm;

    EpisodeSpec episode;
    episode.initial = world.initial;
    episode.series = &world.series;
    episode.rebalancer = spec.rebalancer;
    episode.ga = spec.ga;
    episode.ga.seed = seed;  // paired across arms
    episode.adapter = adapter;
    episode.schedule = world.schedule.empty() ? nullptr : &world.schedule;
    episode.predictor = spec.predictor;
    episode.cfg = spec.config;
    episode.cfg.rng_seed = seed;
    episode.max_reflection_iterations = spec.max_reflection_iterations;
    episode.start = TimeSlot{spec.episode_start_day, 0};
    episode.n_slots =
        spec.episode_days < 0 ? -1 : spec.episode_days * spec.config.slots_per_day;
    episode.transcripts = transcripts;

    try {
        const EpisodeResult result = run_episode(episode);
        row.metrics = metrics_report(result);
        row.trace_hash = result.trace_hash;
        row.total_satisfied = result.total_satisfied;
        row.total_demand = result.total_demand;
        row.adaptations_valid = result.adaptations_valid;
        row.adaptations_fellback = result.adaptations_fellback;
    } catch (const std::exception& e) {
        row.failed = true;
        row.failure = e.what();
    }
    return row;
}

void append_metric_rows(std::ostringstream& csv, const ExperimentSpec& spec,
                        const RunRow& row) {
    const auto emit = [&](const char* metric, double value) {
        csv << spec.scenario_label << "," << spec.level_label << "," << row.arm
            << "," << row.seed << "," << metric << "," << value << "\n";
    };
    emit("avg_satisfaction", row.metrics.avg_satisfaction);
    emit("equity", row.metrics.equity);
    emit("gini", row.metrics.gini);
    emit("theil", row.metrics.theil);
    emit("revenue", row.metrics.revenue);
}

nlohmann::json aggregate(const std::vector<RunRow>& rows, const std::string& arm) {
    const auto stat = [&](auto getter) {
        std::vector<double> xs;
        for (const RunRow& r : rows)
            if (!r.failed && r.arm == arm) xs.push_back(getter(r));
        nlohmann::json out;
        if (xs.empty()) {
            out["mean"] = nullptr;
            out["std"] = nullptr;
            return out;
        }
        const double mean =
            std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= static_cast<double>(xs.size());
        out["mean"] = mean;
        out["std"] = std::sqrt(var);
        return out;
    };
    nlohmann::json out;
    out["avg_satisfaction"] = stat([](const RunRow& r) { return r.metrics.avg_satisfaction; });
    out["equity"] = stat([](const RunRow& r) { return r.metrics.equity; });
    out["gini"] = stat([](const RunRow& r) { return r.metrics.gini; });
    out["theil"] = stat([](const RunRow& r) { return r.metrics.theil; });
    out["revenue"] = stat([](const RunRow& r) { return r.metrics.revenue; });
    return out;
}

}  // namespace

ExperimentResults run_experiment(const ExperimentSpec& spec) {
    const bool has_adapter = spec.adapter != "none";

    struct RepOutput {
        std::vector<RunRow> rows;
        std::vector<AdaptationTranscript> transcripts;
    };
    std::vector<RepOutput> reps(static_cast<size_t>(spec.repetitions));

    const auto run_rep = [&](int rep) {
        const std::uint64_t seed = spec.config.rng_seed + static_cast<std::uint64_t>(rep);
        const World world = build_world(spec, static_cast<std::uint64_t>(rep));
        RepOutput& out = reps[static_cast<size_t>(rep)];

        out.rows.push_back(run_arm(spec, world, seed, "baseline", nullptr, nullptr));
        if (has_adapter) {
            std::unique_ptr<Adapter> adapter;
            if (spec.adapter.rfind("mock:", 0) == 0) {
                adapter = make_mock_adapter(spec.adapter.substr(5), seed);
            } else if (spec.adapter == "llm") {
                adapter = make_llm_adapter(spec.llm);
            } else {
                throw SpecError("unknown adapter: " + spec.adapter);
            }
            out.rows.push_back(run_arm(spec, world, seed, "adapted", adapter.get(),
                                       &out.transcripts));

            // Paired arms must have seen identical demand and scenario draws.
            const RunRow& a = out.rows[0];
            const RunRow& b = out.rows[1];
            if (!a.failed && !b.failed && a.trace_hash != b.trace_hash)
                throw std::logic_error("paired arms diverged: trace hashes differ");
        }
    };

    if (spec.workers <= 1 || spec.repetitions == 1) {
        for (int rep = 0; rep < spec.repetitions; ++rep) run_rep(rep);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        const int workers = std::min(spec.workers, spec.repetitions);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int rep = next.fetch_add(1); rep < spec.repetitions;
                     rep = next.fetch_add(1))
                    run_rep(rep);
            });
        }
        for (auto& t : pool) t.join();
    }

    ExperimentResults results;
    for (auto& rep : reps)
        for (auto& row : rep.rows) results.rows.push_back(std::move(row));
    std::sort(results.rows.begin(), results.rows.end(),
              [](const RunRow& a, const RunRow& b) {
                  return a.seed != b.seed ? a.seed < b.seed : a.arm < b.arm;
              });

    nlohmann::json runs = nlohmann::json::array();
    std::ostringstream csv;
    csv << "scenario,level,arm,seed,metric,value\n";
    for (const RunRow& row : results.rows) {
        nlohmann::json r;
        r["seed"] = row.seed;
        r["arm"] = row.arm;
        r["failed"] = row.failed;
        if (row.failed) {
            r["failure"] = row.failure;
            results.failed_runs += 1;
        } else {
            r["metrics"] = {{"avg_satisfaction", row.metrics.avg_satisfaction},
                            {"equity", row.metrics.equity},
                            {"gini", row.metrics.gini},
                            {"theil", row.metrics.theil},
                            {"revenue", row.metrics.revenue},
                            {"zero_demand_flagged", row.metrics.zero_demand_flagged}};
            r["total_satisfied"] = row.total_satisfied;
            r["total_demand"] = row.total_demand;
            r["trace_hash"] = row.trace_hash;
            r["adaptations_valid"] = row.adaptations_valid;
            r["adaptations_fellback"] = row.adaptations_fellback;
            append_metric_rows(csv, spec, row);
        }
        runs.push_back(std::move(r));
    }

    nlohmann::json doc;
    doc["spec"] = spec.resolved();
    doc["runs"] = std::move(runs);
    doc["aggregate"]["baseline"] = aggregate(results.rows, "baseline");
    if (has_adapter) doc["aggregate"]["adapted"] = aggregate(results.rows, "adapted");
    doc["failed_runs"] = results.failed_runs;

    results.document = std::move(doc);
    results.csv = csv.str();

    if (!spec.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(spec.output_dir);
        std::ofstream(fs::path(spec.output_dir) / "results.json")
            << results.document.dump(2) << "\n";
        std::ofstream(fs::path(spec.output_dir) / "results.csv") << results.csv;
        if (has_adapter) {
            const fs::path dir = fs::path(spec.output_dir) / "transcripts";
            fs::create_directories(dir);
            for (size_t rep = 0; rep < reps.size(); ++rep) {
                for (size_t k = 0; k < reps[rep].transcripts.size(); ++k) {
                    std::ostringstream name;
                    name << "rep" << rep << "_call" << k << ".json";
                    std::ofstream(dir / name.str())
                        << reps[rep].transcripts[k].to_json() << "\n";
                }
            }
        }
    }
    return results;
}

}  // namespace rebal
