#pragma once
// Application settings and the wiring of the runtime components.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "dkg/confidence.hpp"
#include "dkg/engine.hpp"
#include "dkg/eval.hpp"
#include "dkg/llm.hpp"
#include "dkg/qa.hpp"

namespace dkg {

enum class ScorerKind { Heuristic, Llm };
enum class GeneratorKind { Deterministic, Llm };

std::string_view to_string(ScorerKind k);
std::string_view to_string(GeneratorKind k);
ScorerKind parse_scorer_kind(std::string_view s);
GeneratorKind parse_generator_kind(std::string_view s);

// Root of the bundled data files.
std::filesystem::path default_data_dir();

struct AppConfig {
    std::filesystem::path data_dir = default_data_dir();
    // Relative paths resolve against data_dir.
    std::filesystem::path dictionary = "dictionary.json";
    std::filesystem::path static_kg = "static_kg.jsonl";
    std::filesystem::path scenarios = "scenarios.json";
    std::filesystem::path prompts_dir = "prompts";
    std::optional<std::filesystem::path> log_dir;     // persistence; none = in memory
    std::optional<std::filesystem::path> static_dir;  // served under / when set

    ScorerConfig scorer;
    ScorerKind scorer_kind = ScorerKind::Heuristic;
    GeneratorKind generator = GeneratorKind::Deterministic;
    LlmSettings llm;
    int llm_retries = 2;

    double tau_default = 0.8;
    std::size_t top_k_default = 5;
    unsigned scoring_threads = 1;

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string api_secret;  // empty = no header check

    std::filesystem::path resolve(const std::filesystem::path& p) const;
    // Throws Errc::Validation.
    void validate() const;

    // Applies DKG_* environment variables on top of the current values.
    AppConfig with_env_overrides() const;
};

void to_json(json& j, const AppConfig& c);
void from_json(const json& j, AppConfig& c);

// Missing file = defaults. Environment overrides are applied afterwards.
AppConfig load_config(const std::optional<std::filesystem::path>& path);

// "0.25,0.35,0.2,0.2" -> weights. Throws Errc::Validation.
ScorerWeights parse_weights(std::string_view text);

struct Services {
    AppConfig config;
    std::shared_ptr<const ConceptDictionary> dictionary;
    std::shared_ptr<const StaticKg> static_kg;
    std::shared_ptr<ChatClient> chat;  // null unless some component uses the LLM
    std::shared_ptr<const TripleScorer> scorer;
    std::shared_ptr<const AnswerGenerator> generator;
    std::shared_ptr<KgStore> store;
    std::shared_ptr<Engine> engine;
    std::shared_ptr<QaEngine> qa;
    QaOptions qa_options;

    WhatIfRunner whatif() const;
};

// One evaluation job. The subjects come from `records`/`labels` files when
// both are given, otherwise from a generated corpus. Runs in a private store.
struct EvalRequest {
    std::optional<std::filesystem::path> records;
    std::optional<std::filesystem::path> labels;
    CorpusSpec corpus;
    bool sweep = false;  // false: Historical, ConfidenceAware and Filtered(tau) only
    std::optional<double> tau;  // non-sweep filter; default tau_default
    int runs = 3;
    std::uint64_t seed = 0;
    RiskGenerator generator = RiskGenerator::RuleBased;
};

void from_json(const json& j, EvalRequest& r);

struct EvalOutcome {
    std::vector<SweepRow> rows;
    std::string csv;
    json report;
};

EvalOutcome run_eval(const Services& services, const EvalRequest& request);

// `chat` replaces the HTTP client when given (tests).
Services build_services(const AppConfig& config, std::shared_ptr<ChatClient> chat = nullptr);

} // namespace dkg
