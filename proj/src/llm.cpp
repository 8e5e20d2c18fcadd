#include "manip/llm.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "manip/errors.hpp"

namespace manip {

using nlohmann::json;

namespace {

// "http://127.0.0.1:8089/v1/x" -> {"http://127.0.0.1:8089", "/v1/x"}
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("endpoint must look like scheme://host[:port]/path");
    const auto path = url.find('/', scheme + 3);
    if (path == std::string::npos) return {url, "/"};
    return {url.substr(0, path), url.substr(path)};
}

std::string corrective_suffix(const std::string& error) {
    return "\n\nYour previous reply was rejected: " + error +
           "\nReply again with only the corrected JSON array.";
}

}  // namespace

std::string LlmClient::complete(const std::string& prompt, double* latency_ms) {
    const auto [base, path] = split_endpoint(cfg_.endpoint);
    httplib::Client http(base);
    http.set_connection_timeout(cfg_.timeout_seconds, 0);
    http.set_read_timeout(cfg_.timeout_seconds, 0);
    http.set_write_timeout(cfg_.timeout_seconds, 0);

    const json body = {
        {"model", cfg_.model},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
        {"temperature", 0},
        {"max_tokens", cfg_.max_tokens},
    };
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != '\0')
        headers.emplace("Authorization", std::string("Bearer ") + key);

    const auto start = std::chrono::steady_clock::now();
    httplib::Result res = http.Post(path, headers, body.dump(), "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - start;
    if (latency_ms)
        *latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();

    if (!res) throw TransportError(httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("HTTP status " + std::to_string(res->status));

    json parsed;
    try {
        parsed = json::parse(res->body);
    } catch (const json::parse_error&) {
        throw SchemaError("response body is not JSON");
    }
    try {
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw SchemaError("response missing choices[0].message.content");
    }
}

std::string render_prompt(const std::string& instruction, const WorldSummary& world) {
    std::string out;
    out += "You are the task planner for a tabletop manipulation robot.\n";
    out += "Decompose the instruction into subtasks for the skill executor.\n";
    out += "\n";
    out += "Reply with ONLY a JSON array of subtask objects, no prose. Allowed forms:\n";
    out += "  {\"op\":\"move_to\",\"target\":REF_OR_LOCATION}\n";
    out += "  {\"op\":\"grasp\",\"object\":REF}\n";
    out += "  {\"op\":\"release\"}\n";
    out += "  {\"op\":\"place_on\",\"target\":REF}\n";
    out += "  {\"op\":\"avoid_region\",\"obstacle\":REF,\"then\":REF_OR_LOCATION}\n";
    out += "REF is an object with any of \"color\", \"shape\", \"name\" (the literal id).\n";
    out += "REF_OR_LOCATION may instead be {\"location\":\"home\"} or {\"location\":\"center\"}.\n";
    out += "Rules: one gripper, so never grasp while holding; grasp only graspable\n";
    out += "objects; every ref must match exactly one object in the world below.\n";
    out += "\n";
    out += "World:\n";
    out += world.to_json_text();
    out += "\n\nInstruction: ";
    out += instruction;
    out += "\n";
    return out;
}

namespace {

// Shared by plan and replan: `allow_empty` turns an empty array into the
// replan success hint instead of an invalid plan.
TaskPlan plan_llm_core(const std::string& instruction, const WorldSummary& world,
                       LlmClient& client, const std::string& context, bool allow_empty,
                       bool* empty_hint, LlmExchange* exchange) {
    const LlmConfig& cfg = client.config();
    LlmExchange ex;
    ex.prompt = render_prompt(instruction, world) + context;
    ex.model = cfg.model;
    ex.max_tokens = cfg.max_tokens;
    ex.temperature = 0.0;

    const int attempts = std::max(1, cfg.max_retries);
    std::string prompt = ex.prompt;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        ex.retries_used = attempt;
        try {
            double ms = 0.0;
            ex.raw_response = client.complete(prompt, &ms);
            ex.latency_ms += ms;

            TaskPlan plan;
            plan.subtasks = subtasks_from_json_text(ex.raw_response);
            plan.source = PlanSource::llm;
            plan.instruction_hash = fnv1a64(instruction);
            if (allow_empty && plan.subtasks.empty()) {
                *empty_hint = true;
            } else {
                validate_plan(plan, world);
            }
            ex.error.clear();
            if (exchange) *exchange = ex;
            return plan;
        } catch (const TransportError& e) {
            // the network being down is not something a re-prompt fixes
            ex.error = e.what();
            if (exchange) *exchange = ex;
            throw;
        } catch (const Error& e) {
            ex.error = e.what();
            if (attempt == attempts) {
                if (exchange) *exchange = ex;
                throw;
            }
            prompt = ex.prompt + corrective_suffix(e.what());
        }
    }
    throw PlannerFailure("unreachable");  // loop always returns or throws
}

}  // namespace

TaskPlan plan_llm(const std::string& instruction, const WorldSummary& world, LlmClient& client,
                  LlmExchange* exchange) {
    return plan_llm_core(instruction, world, client, "", false, nullptr, exchange);
}

TaskPlan LlmPlanner::plan(const std::string& instruction, const WorldSummary& world) {
    return plan_llm(instruction, world, *client_, &last_);
}

ReplanOutcome LlmPlanner::replan(const std::string& instruction, const TaskPlan& prev,
                                 const WorldSummary& world, const FailureInfo& failure) {
    std::string context = "\n\nThe previous plan " + subtasks_to_json_text(prev.subtasks) +
                          " failed at subtask " + std::to_string(failure.failed_subtask) + ": " +
                          failure.cause +
                          ".\nPlan only the remaining work against the world above; reply []"
                          " if the instruction is already satisfied.";
    ReplanOutcome out;
    out.plan = plan_llm_core(instruction, world, *client_, context, true,
                             &out.goal_satisfied_hint, &last_);
    return out;
}

}  // namespace manip
