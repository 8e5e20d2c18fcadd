#pragma once

#include <memory>
#include <string>
#include <utility>

#include "manip/planner.hpp"

namespace manip {

struct LlmConfig {
    std::string endpoint = "http://127.0.0.1:8089/v1/chat/completions";
    std::string api_key_env = "LLM_API_KEY";  // env var NAME holding the key
    std::string model = "planner-v1";
    int timeout_seconds = 30;
    int max_retries = 2;  // total attempts: the first call plus one corrective re-prompt
    int max_tokens = 512;
};

// One planning round trip, kept for logs and traces.
struct LlmExchange {
    std::string prompt;  // initial prompt (corrective re-prompts append to it)
    std::string model;
    int max_tokens = 0;
    double temperature = 0.0;
    std::string raw_response;  // content of the last reply
    std::string error;         // empty on success
    double latency_ms = 0.0;   // summed over attempts
    int retries_used = 0;      // attempts actually made
};

// Blocking chat-completions client. POST body and expected response shape
// are documented in the README; the Authorization header is attached only
// when the configured environment variable is set.
class LlmClient {
public:
    explicit LlmClient(LlmConfig cfg) : cfg_(std::move(cfg)) {}
    virtual ~LlmClient() = default;

    // One request; returns the assistant message content.
    // Throws TransportError (unreachable, timeout, non-200) or SchemaError
    // (response envelope malformed).
    virtual std::string complete(const std::string& prompt, double* latency_ms);

    const LlmConfig& config() const { return cfg_; }

private:
    LlmConfig cfg_;
};

// Deterministic prompt: schema rules, the serialized world, the instruction.
std::string render_prompt(const std::string& instruction, const WorldSummary& world);

// Prompts the model, parses the strict-JSON subtask array, validates against
// the world; invalid replies get one corrective re-prompt embedding the
// validation error before the last error propagates. TransportError aborts
// immediately. `exchange`, when given, is filled even on failure.
TaskPlan plan_llm(const std::string& instruction, const WorldSummary& world, LlmClient& client,
                  LlmExchange* exchange = nullptr);

class LlmPlanner final : public Planner {
public:
    explicit LlmPlanner(std::shared_ptr<LlmClient> client) : client_(std::move(client)) {}

    TaskPlan plan(const std::string& instruction, const WorldSummary& world) override;
    // Re-prompts with the failed plan and cause appended; an empty array
    // reply means nothing is left to do and sets the success hint.
    ReplanOutcome replan(const std::string& instruction, const TaskPlan& prev,
                         const WorldSummary& world, const FailureInfo& failure) override;

    const LlmExchange& last_exchange() const { return last_; }

private:
    std::shared_ptr<LlmClient> client_;
    LlmExchange last_;
};

}  // namespace manip
