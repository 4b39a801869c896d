#include "rebal/adaptation.hpp"

#include "rebal/rebalancer.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rebal {

namespace {

std::string fixed1(double v) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(1);
    out << v;
    return out.str();
}

std::string clock_of(TimeSlot when, int slots_per_day) {
    const int minutes = static_cast<int>(
        static_cast<long long>(when.slot) * 24 * 60 / slots_per_day);
    char buf[6];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", minutes / 60, minutes % 60);
    return buf;
}

std::string render_moves(const RebalancingPlan& plan) {
    const auto moves = plan_to_moves(plan);
    if (moves.empty()) return "No relocations planned.";
    std::ostringstream out;
    for (size_t k = 0; k < moves.size(); ++k) {
        if (k) out << "\n";
        out << "Move " << moves[k].count
            << (moves[k].count == 1 ? " vehicle" : " vehicles") << " from Region "
            << moves[k].from << " to " << moves[k].to;
    }
    return out.str();
}

}  // namespace

std::string PromptBundle::render() const {
    std::ostringstream out;
    out << "Background:\n" << background << "\n\n";
    out << "System Status:\n" << system_status << "\n\n";
    if (initial_strategy)
        out << "Initial Rebalancing Strategy:\n" << *initial_strategy << "\n\n";
    out << "Emergent Situation:\n" << emergent_situation << "\n\n";
    out << "Instruction:\n" << instruction << "\n\n";
    out << "Constraint:\n" << constraint << "\n\n";
    out << "Output Format:\n" << output_schema << "\n";
    return out.str();
}

PromptBundle build_prompt(const FleetState& state,
                          const std::vector<DemandMatrix>& predicted,
                          const DemandStats& stats,
                          const std::optional<RebalancingPlan>& initial,
                          const EmergentScenario& scenario,
                          const ExperimentConfig& cfg, TimeSlot when) {
    const int n = state.size();
    PromptBundle prompt;

    {
        std::ostringstream bg;
        bg << "You are an operations planning assistant embedded in a shared "
              "micromobility fleet management system. The city is divided into "
           << n
           << " regions, indexed 0 to " << n - 1
           << ". Before each planning period the operator may relocate vehicles "
              "between regions; trip requests then consume a vehicle at their "
              "origin region and release it at their destination region. The "
              "operator's standing objective is to maximize net revenue: fare "
              "income from served trips minus relocation costs.";
        prompt.background = bg.str();
    }

    {
        std::ostringstream status;
        status << "- System time: day " << when.day << ", "
               << clock_of(when, cfg.slots_per_day) << " (slot " << when.slot
               << " of " << cfg.slots_per_day << ")\n";
        status << "- Current vehicle distribution (vehicles per region): [";
        for (RegionId i = 0; i < n; ++i) {
            if (i) status << ", ";
            status << state[i];
        }
        status << "]\n";
        status << "- Predicted trip demand over the next " << predicted.size()
               << " slots (origin -> destination: trips; zero flows omitted):";
        bool any_flow = false;
        DemandMatrix agg(n);
        for (const auto& m : predicted)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) agg.at(i, j) += m.at(i, j);
        for (RegionId i = 0; i < n; ++i) {
            for (RegionId j = 0; j < n; ++j) {
                if (agg.at(i, j) == 0) continue;
                status << "\n    Region " << i << " -> " << j << ": " << agg.at(i, j);
                any_flow = true;
            }
        }
        if (!any_flow) status << "\n    (no trips predicted)";
        status << "\n- Per-region outbound demand per slot, from historical data:";
        for (RegionId i = 0; i < n && i < static_cast<int>(stats.per_region.size()); ++i) {
            const RegionStat& s = stats.per_region[static_cast<size_t>(i)];
            status << "\n    Region " << i << " = {avg: " << fixed1(s.avg)
                   << ", std: " << fixed1(s.std) << ", min: " << s.min
                   << ", max: " << s.max << "}";
        }
        prompt.system_status = status.str();
    }

    if (initial) prompt.initial_strategy = render_moves(*initial);

    prompt.emergent_situation = scenario.narrative;

    prompt.instruction =
        "Produce the vehicle rebalancing strategy to execute now, adapting the "
        "initial strategy when one is provided. Think through these steps before "
        "proposing any moves:\n"
        "1. Decide whether vehicles need to be reallocated, and from which "
        "regions, to meet both the emergent situation and the operator's "
        "objective.\n"
        "2. Explain how you trade off net revenue against the emergent "
        "requirement. If the emergent goal differs from the operator's "
        "objective, compute the goal value before and after your adaptation.\n"
        "3. Justify the final set of moves with clear reasoning.";

    prompt.constraint =
        "The total number of vehicles across all regions after your moves must "
        "equal the total before your moves. Every move must be sourced from "
        "vehicles currently present in its origin region.";

    {
        std::ostringstream schema;
        schema << "End your reply with exactly one fenced code block containing a "
                  "JSON object of this shape:\n"
               << "```json\n"
               << "{\"moves\": [{\"from\": 0, \"to\": 1, \"count\": 2}]}\n"
               << "```\n"
               << "Region indices must lie in [0, " << n
               << ") and counts must be nonnegative integers. An empty \"moves\" "
                  "array keeps the current distribution.";
        prompt.output_schema = schema.str();
    }

    return prompt;
}

namespace {

// Balanced-brace candidate starting at `start` (raw[start] == '{'), honoring
// JSON string literals. Returns one past the closing brace, or npos.
size_t find_block_end(const std::string& raw, size_t start) {
    int depth = 0;
    bool in_string = false;
    for (size_t i = start; i < raw.size(); ++i) {
        const char c = raw[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string::npos;
}

}  // namespace

AdapterResponse parse_response(const std::string& raw, int n) {
    AdapterResponse resp;
    resp.raw_text = raw;

    for (size_t start = raw.find('{'); start != std::string::npos;
         start = raw.find('{', start + 1)) {
        const size_t end = find_block_end(raw, start);
        if (end == std::string::npos) continue;
        const nlohmann::json doc = nlohmann::json::parse(
            raw.begin() + static_cast<long>(start), raw.begin() + static_cast<long>(end),
            nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("moves")) continue;

        // First block matching the schema decides the outcome.
        const auto fail = [&](const std::string& why) {
            std::ostringstream msg;
            msg << "block at offset " << start << ": " << why;
            resp.parse_error = msg.str();
            return resp;
        };
        const auto& moves = doc.at("moves");
        if (!moves.is_array()) return fail("\"moves\" is not an array");

        std::vector<Move> parsed;
        for (size_t k = 0; k < moves.size(); ++k) {
            const auto& item = moves[k];
            std::ostringstream where;
            where << "move " << k << ": ";
            if (!item.is_object()) return fail(where.str() + "not an object");
            for (const char* field : {"from", "to", "count"}) {
                if (!item.contains(field))
                    return fail(where.str() + "missing field \"" + field + "\"");
                if (!item.at(field).is_number_integer())
                    return fail(where.str() + "field \"" + field +
                                "\" is not an integer");
            }
            const auto from = item.at("from").get<long long>();
            const auto to = item.at("to").get<long long>();
            const auto count = item.at("count").get<long long>();
            for (auto [name, idx] : {std::pair{"from", from}, {"to", to}}) {
                if (idx < 0 || idx >= n) {
                    std::ostringstream why;
                    why << where.str() << "\"" << name << "\" index " << idx
                        << " outside [0, " << n << ")";
                    return fail(why.str());
                }
            }
            if (count < 0) {
                std::ostringstream why;
                why << where.str() << "negative count " << count;
                return fail(why.str());
            }
            parsed.push_back({static_cast<RegionId>(from), static_cast<RegionId>(to),
                              static_cast<int>(count)});
        }

        int self_moves = 0;
        for (const Move& m : parsed)
            if (m.from == m.to && m.count > 0) ++self_moves;
        resp.parsed_plan = plan_from_moves(parsed, n);
        if (self_moves > 0) {
            std::ostringstream note;
            note << "dropped " << self_moves << " self-move(s)";
            resp.note = note.str();
        }
        return resp;
    }

    resp.parse_error = "no move-list JSON block found in response";
    return resp;
}

namespace {

std::string reflection_addendum(const AdaptationIteration& previous, int n) {
    std::ostringstream out;
    out << "\nReflection:\n";
    if (!previous.transport_error.empty()) {
        out << "Your previous response did not arrive (" << previous.transport_error
            << "). Answer again.\n";
    } else {
        out << "Your previous response was:\n<<<\n"
            << previous.response.raw_text << "\n>>>\n";
        if (previous.response.parse_error) {
            out << "It could not be parsed into a move list: "
                << *previous.response.parse_error << ".\n";
        } else if (!previous.violations.empty()) {
            out << "It parsed, but the plan was rejected:\n";
            for (const auto& v : previous.violations) {
                out << "- " << to_string(v.kind) << ": " << v.detail << "\n";
            }
        }
    }
    out << "Re-check your proposal against these criteria before answering: "
           "(1) dimensional validity: one JSON move list with region indices "
           "inside [0, "
        << n
        << ") and integer counts; (2) conservation: the total vehicle count "
           "after your moves equals the total before, and no origin ships more "
           "vehicles than it currently holds; (3) task satisfaction: the moves "
           "address the emergent situation and the operator's objective. Reply "
           "with a corrected move list in the required output format.\n";
    return out.str();
}

}  // namespace

AdaptationTranscript adapt(const std::optional<RebalancingPlan>& initial,
                           const FleetState& state,
                           const std::vector<DemandMatrix>& predicted,
                           const DemandStats& stats,
                           const EmergentScenario& scenario, Adapter& adapter,
                           int max_iter, const ExperimentConfig& cfg,
                           TimeSlot when) {
    if (max_iter < 1) throw std::invalid_argument("adapt: max_iter must be >= 1");
    const int n = state.size();
    const long long total_before = state.total();
    const std::string base_prompt =
        build_prompt(state, predicted, stats, initial, scenario, cfg, when).render();

    AdaptationTranscript transcript;
    std::string addendum;  // accumulated reflection context

    for (int k = 1; k <= max_iter; ++k) {
        const std::string delta = (k == 1) ? base_prompt : addendum;
        const std::string prompt = (k == 1) ? base_prompt : base_prompt + addendum;

        AdaptationIteration iter;
        iter.prompt_delta = delta;

        const AdapterResult result = adapter.complete(prompt);
        transcript.iterations_used = k;
        if (!result.ok()) {
            iter.transport_error = result.transport_error;
        } else {
            iter.response = parse_response(result.text, n);
            if (iter.response.parsed_plan) {
                iter.violations =
                    validate_plan(state, *iter.response.parsed_plan, total_before);
            }
        }

        const bool valid = iter.transport_error.empty() &&
                           iter.response.parsed_plan && iter.violations.empty();
        addendum = reflection_addendum(iter, n);
        transcript.iterations.push_back(std::move(iter));

        if (valid) {
            transcript.outcome = AdaptationOutcome::Adapted;
            transcript.plan = *transcript.iterations.back().response.parsed_plan;
            return transcript;
        }
    }

    transcript.outcome = AdaptationOutcome::FellBack;
    transcript.plan = initial ? *initial : RebalancingPlan(n);
    return transcript;
}

std::string AdaptationTranscript::to_json() const {
    nlohmann::json doc;
    doc["outcome"] = outcome == AdaptationOutcome::Adapted ? "adapted" : "fell_back";
    doc["iterations_used"] = iterations_used;
    doc["plan"] = nlohmann::json::parse(plan_to_json(plan));
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& it : iterations) {
        nlohmann::json entry;
        entry["prompt_delta"] = it.prompt_delta;
        entry["raw_text"] = it.response.raw_text;
        if (it.response.parse_error) entry["parse_error"] = *it.response.parse_error;
        if (!it.response.note.empty()) entry["note"] = it.response.note;
        if (!it.transport_error.empty()) entry["transport_error"] = it.transport_error;
        nlohmann::json violations = nlohmann::json::array();
        for (const auto& v : it.violations) {
            nlohmann::json vj;
            vj["kind"] = to_string(v.kind);
            vj["detail"] = v.detail;
            if (v.location) vj["location"] = {v.location->first, v.location->second};
            violations.push_back(std::move(vj));
        }
        entry["violations"] = std::move(violations);
        iters.push_back(std::move(entry));
    }
    doc["iterations"] = std::move(iters);
    return doc.dump(2);
}

// --- Mock adapters ---------------------------------------------------------

namespace {

std::string fenced(const std::string& json_text) {
    return "```json\n" + json_text + "\n```";
}

std::vector<Move> parse_move_lines(const std::string& text) {
    static const std::regex kMove(
        R"(Move (\d+) vehicles? from Region (\d+) to (\d+))");
    std::vector<Move> moves;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), kMove);
         it != std::sregex_iterator(); ++it) {
        moves.push_back({std::stoi((*it)[2]), std::stoi((*it)[3]), std::stoi((*it)[1])});
    }
    return moves;
}

std::string section_of(const std::string& prompt, const std::string& header) {
    const size_t at = prompt.find(header);
    if (at == std::string::npos) return {};
    const size_t body = at + header.size();
    // Sections are separated by a blank line.
    const size_t end = prompt.find("\n\n", body);
    return prompt.substr(body, end == std::string::npos ? std::string::npos
                                                        : end - body);
}

std::vector<int> parse_fleet_vector(const std::string& prompt) {
    const size_t tag = prompt.find("Current vehicle distribution");
    if (tag == std::string::npos) return {};
    const size_t open = prompt.find('[', tag);
    const size_t close = prompt.find(']', open);
    if (open == std::string::npos || close == std::string::npos) return {};
    std::vector<int> fleet;
    std::string token;
    std::istringstream in(prompt.substr(open + 1, close - open - 1));
    while (std::getline(in, token, ',')) fleet.push_back(std::stoi(token));
    return fleet;
}

std::vector<Move> parse_demand_lines(const std::string& prompt) {
    static const std::regex kFlow(R"(Region (\d+) -> (\d+): (\d+))");
    const std::string status = section_of(prompt, "System Status:");
    std::vector<Move> flows;
    for (auto it = std::sregex_iterator(status.begin(), status.end(), kFlow);
         it != std::sregex_iterator(); ++it) {
        flows.push_back({std::stoi((*it)[1]), std::stoi((*it)[2]), std::stoi((*it)[3])});
    }
    return flows;
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
    const auto it = std::search(
        haystack.begin(), haystack.end(), needle.begin(), needle.end(),
        [](char a, char b) {
            return std::tolower(static_cast<unsigned char>(a)) ==
                   std::tolower(static_cast<unsigned char>(b));
        });
    return it != haystack.end();
}

class EchoAdapter final : public Adapter {
public:
    AdapterResult complete(const std::string& prompt) override {
        const std::string section =
            section_of(prompt, "Initial Rebalancing Strategy:");
        const auto moves = parse_move_lines(section);
        nlohmann::json arr = nlohmann::json::array();
        for (const Move& m : moves)
            arr.push_back({{"from", m.from}, {"to", m.to}, {"count", m.count}});
        return {"Keeping the operator's strategy unchanged.\n" +
                    fenced(nlohmann::json{{"moves", arr}}.dump()),
                ""};
    }
    const char* name() const override { return "echo"; }
};

// Deterministic repair oracle. Reads the structured prompt back into numbers
// and either (a) re-targets the whole fleet proportionally to predicted demand
// under an equity directive, or (b) adds moves that route spare vehicles
// (supply beyond local predicted demand, within the remaining row budget)
// toward projected shortages.
class ShortageRepairAdapter final : public Adapter {
public:
    AdapterResult complete(const std::string& prompt) override {
        const std::vector<int> fleet = parse_fleet_vector(prompt);
        const int n = static_cast<int>(fleet.size());
        if (n == 0) return {fenced(R"({"moves": []})"), ""};

        const auto flows = parse_demand_lines(prompt);
        std::vector<long long> demand(static_cast<size_t>(n), 0);
        for (const Move& f : flows)
            if (f.from < n) demand[static_cast<size_t>(f.from)] += f.count;

        const auto initial =
            parse_move_lines(section_of(prompt, "Initial Rebalancing Strategy:"));
        const std::string situation = section_of(prompt, "Emergent Situation:");

        std::vector<Move> out_moves;
        if (contains_ci(situation, "equity") || contains_ci(situation, "gini") ||
            contains_ci(situation, "theil")) {
            out_moves = equity_targets(fleet, demand);
        } else {
            out_moves = coverage_repair(fleet, demand, initial);
        }

        nlohmann::json arr = nlohmann::json::array();
        for (const Move& m : out_moves)
            arr.push_back({{"from", m.from}, {"to", m.to}, {"count", m.count}});
        return {"Adapted strategy below.\n" +
                    fenced(nlohmann::json{{"moves", arr}}.dump()),
                ""};
    }
    const char* name() const override { return "shortage_repair"; }

private:
    static std::vector<Move> equity_targets(const std::vector<int>& fleet,
                                            const std::vector<long long>& demand) {
        const long long dsum =
            std::accumulate(demand.begin(), demand.end(), 0LL);
        FleetState state(fleet);
        if (dsum == 0) return {};
        const auto targets = apportion_largest_remainder(state.total(), demand);
        return plan_to_moves(plan_to_targets(state, targets));
    }

    static std::vector<Move> coverage_repair(const std::vector<int>& fleet,
                                             const std::vector<long long>& demand,
                                             const std::vector<Move>& initial) {
        const int n = static_cast<int>(fleet.size());
        std::vector<long long> row_left(fleet.begin(), fleet.end());
        std::vector<long long> supply_after(fleet.begin(), fleet.end());
        for (const Move& m : initial) {
            if (m.from >= n || m.to >= n) continue;
            row_left[static_cast<size_t>(m.from)] -= m.count;
            supply_after[static_cast<size_t>(m.from)] -= m.count;
            supply_after[static_cast<size_t>(m.to)] += m.count;
        }

        RebalancingPlan extra(n);
        for (;;) {
            RegionId src = -1, dst = -1;
            long long best_spare = 0, best_short = 0;
            for (RegionId i = 0; i < n; ++i) {
                const long long spare =
                    std::min(row_left[static_cast<size_t>(i)],
                             supply_after[static_cast<size_t>(i)] -
                                 demand[static_cast<size_t>(i)]);
                if (spare > best_spare) {
                    best_spare = spare;
                    src = i;
                }
            }
            for (RegionId j = 0; j < n; ++j) {
                const long long shortfall = demand[static_cast<size_t>(j)] -
                                            supply_after[static_cast<size_t>(j)];
                if (shortfall > best_short) {
                    best_short = shortfall;
                    dst = j;
                }
            }
            if (src < 0 || dst < 0) break;
            extra.at(src, dst) += 1;
            row_left[static_cast<size_t>(src)] -= 1;
            supply_after[static_cast<size_t>(src)] -= 1;
            supply_after[static_cast<size_t>(dst)] += 1;
        }

        std::vector<Move> merged = initial;
        for (const Move& m : plan_to_moves(extra)) merged.push_back(m);
        return merged;
    }
};

class CorruptingMixin {
protected:
    explicit CorruptingMixin(std::uint64_t seed) : rng_(seed) {}

    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    std::string corrupt(const std::string& prompt) {
        const auto fleet = parse_fleet_vector(prompt);
        if (unit() < 0.5 && !fleet.empty()) {
            // Overdraw: ship far more vehicles out of region 0 than it holds.
            const int to = fleet.size() > 1 ? 1 : 0;
            nlohmann::json doc{
                {"moves", {{{"from", 0}, {"to", to}, {"count", fleet[0] + 1000}}}}};
            return "Rebalancing aggressively to absorb the surge.\n" +
                   fenced(doc.dump());
        }
        return "The adjusted strategy moves vehicles where they are needed "
               "most. {\"moves\": [ ...";  // deliberately unparseable
    }

    std::mutex mutex_;

private:
    std::mt19937_64 rng_;
};

class FaultyAdapter final : public Adapter, private CorruptingMixin {
public:
    FaultyAdapter(std::unique_ptr<Adapter> inner, double p, std::uint64_t seed)
        : CorruptingMixin(seed), inner_(std::move(inner)), p_(p) {
        if (p < 0.0 || p > 1.0)
            throw std::invalid_argument("faulty adapter: p must be in [0, 1]");
    }
    AdapterResult complete(const std::string& prompt) override {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            if (unit() < p_) return {corrupt(prompt), ""};
        }
        return inner_->complete(prompt);
    }
    const char* name() const override { return "faulty"; }

private:
    std::unique_ptr<Adapter> inner_;
    double p_;
};

class AlwaysInvalidAdapter final : public Adapter, private CorruptingMixin {
public:
    explicit AlwaysInvalidAdapter(std::uint64_t seed) : CorruptingMixin(seed) {}
    AdapterResult complete(const std::string& prompt) override {
        std::lock_guard<std::mutex> lock(mutex_);
        return {corrupt(prompt), ""};
    }
    const char* name() const override { return "always_invalid"; }
};

}  // namespace

std::unique_ptr<Adapter> make_echo_adapter() {
    return std::make_unique<EchoAdapter>();
}

std::unique_ptr<Adapter> make_shortage_repair_adapter() {
    return std::make_unique<ShortageRepairAdapter>();
}

std::unique_ptr<Adapter> make_faulty_adapter(std::unique_ptr<Adapter> inner,
                                             double p, std::uint64_t seed) {
    return std::make_unique<FaultyAdapter>(std::move(inner), p, seed);
}

std::unique_ptr<Adapter> make_always_invalid_adapter(std::uint64_t seed) {
    return std::make_unique<AlwaysInvalidAdapter>(seed);
}

std::unique_ptr<Adapter> make_mock_adapter(const std::string& spec,
                                           std::uint64_t seed) {
    if (spec == "echo") return make_echo_adapter();
    if (spec == "shortage_repair") return make_shortage_repair_adapter();
    if (spec == "always_invalid") return make_always_invalid_adapter(seed);
    if (spec.rfind("faulty:", 0) == 0) {
        const double p = std::stod(spec.substr(7));
        return make_faulty_adapter(make_echo_adapter(), p, seed);
    }
    throw std::invalid_argument("unknown mock adapter: " + spec);
}

}  // namespace rebal
