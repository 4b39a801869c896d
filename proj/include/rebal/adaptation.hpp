#ifndef REBAL_ADAPTATION_HPP
#define REBAL_ADAPTATION_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rebal/core.hpp"
#include "rebal/ingest.hpp"
#include "rebal/scenario.hpp"

namespace rebal {

// The structured prompt handed to the language model, section by section.
// render() emits the sections in exactly this order; the initial-strategy
// section is present iff an initial plan was supplied.
struct PromptBundle {
    std::string background;
    std::string system_status;
    std::optional<std::string> initial_strategy;
    std::string emergent_situation;
    std::string instruction;
    std::string constraint;
    std::string output_schema;

    std::string render() const;
};

// What one model call produced: raw text always, then either a parsed plan or
// a parse error, never both.
struct AdapterResponse {
    std::string raw_text;
    std::optional<RebalancingPlan> parsed_plan;
    std::optional<std::string> parse_error;
    std::string note;  // e.g. self-moves dropped during parsing
};

struct AdapterResult {
    std::string text;
    std::string transport_error;  // empty on success

    bool ok() const { return transport_error.empty(); }
};

// Narrow model interface: prompt text in, raw text out. Hosted models, local
// stubs and offline mocks are interchangeable behind it. Implementations must
// be safe for concurrent complete() calls.
class Adapter {
public:
    virtual ~Adapter() = default;
    virtual AdapterResult complete(const std::string& prompt) = 0;
    virtual const char* name() const = 0;
};

struct AdaptationIteration {
    // Full rendered prompt on the first iteration, the reflection addendum on
    // later ones; prompt + addenda reconstruct every request byte for byte.
    std::string prompt_delta;
    AdapterResponse response;
    std::vector<PlanViolation> violations;
    std::string transport_error;
};

enum class AdaptationOutcome { Adapted, FellBack };

struct AdaptationTranscript {
    std::vector<AdaptationIteration> iterations;
    AdaptationOutcome outcome = AdaptationOutcome::FellBack;
    RebalancingPlan plan;  // the adapted plan, or the fallback
    int iterations_used = 0;

    std::string to_json() const;
};

// Renders the adaptation prompt. Fleet appears as a bracketed vector,
// predicted demand as sparse origin->destination lines aggregated over the
// horizon, per-region statistics in {avg, std, min, max} form, and the
// initial plan as "Move c vehicles from Region a to b" lines. Rendering is
// deterministic: identical inputs give identical bytes.
PromptBundle build_prompt(const FleetState& state,
                          const std::vector<DemandMatrix>& predicted,
                          const DemandStats& stats,
                          const std::optional<RebalancingPlan>& initial,
                          const EmergentScenario& scenario,
                          const ExperimentConfig& cfg, TimeSlot when);

// Extracts the first JSON object containing a "moves" array from anywhere in
// `raw`, then checks indices against n and count signs. Problems come back as
// parse_error data, never as exceptions.
AdapterResponse parse_response(const std::string& raw, int n);

// The bounded self-reflection loop: prompt, parse, validate, and re-prompt
// with the full violation list until a valid plan appears or max_iter is
// exhausted, then fall back to the initial plan (or the zero plan in planning
// mode). The returned transcript records every call verbatim.
AdaptationTranscript adapt(const std::optional<RebalancingPlan>& initial,
                           const FleetState& state,
                           const std::vector<DemandMatrix>& predicted,
                           const DemandStats& stats,
                           const EmergentScenario& scenario, Adapter& adapter,
                           int max_iter, const ExperimentConfig& cfg,
                           TimeSlot when = TimeSlot{0, 0});

// --- Offline mock adapters ----------------------------------------------

// Re-emits the prompt's initial strategy as a schema-valid move list.
std::unique_ptr<Adapter> make_echo_adapter();

// Deterministic repair oracle: reads fleet, predicted demand and the initial
// strategy back out of the prompt, then either routes spare vehicles toward
// projected shortages or, under an equity directive, re-targets the fleet
// proportionally to demand.
std::unique_ptr<Adapter> make_shortage_repair_adapter();

// Wraps another adapter and corrupts its output (overdraw plan or malformed
// text, alternating by seeded draw) with probability p per call.
std::unique_ptr<Adapter> make_faulty_adapter(std::unique_ptr<Adapter> inner,
                                             double p, std::uint64_t seed);

// Every call yields an unusable response.
std::unique_ptr<Adapter> make_always_invalid_adapter(std::uint64_t seed);

// Mock registry for config/CLI selection: "echo", "shortage_repair",
// "faulty:<p>" (echo-backed), "always_invalid".
std::unique_ptr<Adapter> make_mock_adapter(const std::string& spec,
                                           std::uint64_t seed);

// --- Live adapter ---------------------------------------------------------

struct LlmAdapterConfig {
    std::string endpoint = "http://localhost:8080/v1";
    std::string model = "gpt-4o";
    double temperature = 0.2;
    double timeout_seconds = 60.0;
    int max_retries = 2;
    std::string credential_env = "LLM_API_KEY";
    int max_in_flight = 4;
};

// OpenAI-compatible chat-completions client with retry/backoff and an
// in-flight request cap. Construction fails if the credential variable is
// unset; transport failures surface through AdapterResult, never as throws.
std::unique_ptr<Adapter> make_llm_adapter(const LlmAdapterConfig& cfg);

}  // namespace rebal

#endif  // REBAL_ADAPTATION_HPP
