#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace manip {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- environment ----
struct InvalidScenario : Error {
    explicit InvalidScenario(const std::string& what) : Error("invalid scenario: " + what) {}
};
struct EpisodeFinished : Error {
    EpisodeFinished() : Error("step() called on a finished episode") {}
};

// ---- numerics ----
struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what) : Error("dimension mismatch: " + what) {}
};
struct NonFiniteGradient : Error {
    NonFiniteGradient() : Error("non-finite gradient") {}
};
struct NonFiniteLoss : Error {
    NonFiniteLoss() : Error("non-finite loss") {}
};
struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& what) : Error("length mismatch: " + what) {}
};
struct EmptyBuffer : Error {
    EmptyBuffer() : Error("update on empty rollout buffer") {}
};
struct InsufficientReplay : Error {
    InsufficientReplay() : Error("replay buffer holds fewer transitions than one batch") {}
};
struct CheckpointError : Error {
    explicit CheckpointError(const std::string& what) : Error("checkpoint: " + what) {}
};

// ---- language / planning ----
struct ParseError : Error {
    ParseError(std::size_t position, std::string expected, const std::string& got)
        : Error("parse error at token " + std::to_string(position) + ": expected " + expected +
                ", got '" + got + "'"),
          position(position),
          expected(std::move(expected)) {}
    std::size_t position;
    std::string expected;
};
struct UnresolvableRef : Error {
    explicit UnresolvableRef(const std::string& ref) : Error("unresolvable reference: " + ref) {}
};
struct AmbiguousRef : Error {
    explicit AmbiguousRef(const std::string& ref) : Error("ambiguous reference: " + ref) {}
};
struct InvalidPlan : Error {
    explicit InvalidPlan(const std::string& what) : Error("invalid plan: " + what) {}
};
struct PlannerFailure : Error {
    explicit PlannerFailure(const std::string& what) : Error("planner failure: " + what) {}
};

// ---- llm transport ----
struct TransportError : Error {
    explicit TransportError(const std::string& what) : Error("transport: " + what) {}
};
struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error("response schema: " + what) {}
};

// ---- execution / benchmarking ----
struct SkillMissing : Error {
    explicit SkillMissing(const std::string& skill) : Error("no policy for skill: " + skill) {}
};
struct TraceInvalid : Error {
    explicit TraceInvalid(const std::string& what) : Error("trace: " + what) {}
};
struct EmptySet : Error {
    explicit EmptySet(const std::string& what) : Error("metric over empty set: " + what) {}
};
struct ZeroBaseline : Error {
    ZeroBaseline() : Error("improvement against zero baseline") {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

}  // namespace manip
