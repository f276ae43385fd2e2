#pragma once
// Baseline and confidence-aware question answering over stored variants.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dkg/engine.hpp"
#include "dkg/llm.hpp"
#include "dkg/store.hpp"

namespace dkg {

enum class QaMode { Baseline, ConfidenceAware };

std::string_view to_string(QaMode m);
QaMode parse_qa_mode(std::string_view s);

struct QaRequest {
    std::string subject_id;
    std::string question;
    QaMode mode = QaMode::Baseline;
    std::optional<double> tau;  // ConfidenceAware only; absent = all scored triples
    std::size_t top_k = 5;
    // Defaults to false for Baseline and true for ConfidenceAware; any other
    // combination is rejected.
    std::optional<bool> include_scores_in_prompt;

    // Throws Errc::Validation.
    void validate() const;
    bool scores_in_prompt() const { return mode == QaMode::ConfidenceAware; }
};

void to_json(json& j, const QaRequest& r);
void from_json(const json& j, QaRequest& r);

struct EvidenceItem {
    Triple triple;
    std::optional<double> confidence;
    std::string head_label;
    std::string tail_label;
};

struct QaExchange {
    QaRequest request;
    std::vector<EvidenceItem> evidence;
    std::vector<std::string> anchors;
    std::int64_t version = 0;
    std::string prompt;
    std::string answer;
    std::string generator_id;
    std::string created_at;
    std::optional<std::string> error;  // set when generation failed
};

void to_json(json& j, const QaExchange& e);

struct AnswerInput {
    const QaRequest& request;
    const std::vector<EvidenceItem>& evidence;
    const ChatRequest& prompt;
};

class AnswerGenerator {
public:
    virtual ~AnswerGenerator() = default;
    virtual std::string id() const = 0;
    // Throws Errc::Upstream when the backing model fails.
    virtual std::string generate(const AnswerInput& input) const = 0;
};

// Offline template answer: evidence grouped by relation in retrieval order.
class DeterministicGenerator final : public AnswerGenerator {
public:
    std::string id() const override { return "deterministic"; }
    std::string generate(const AnswerInput& input) const override;
};

class LlmGenerator final : public AnswerGenerator {
public:
    explicit LlmGenerator(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}
    std::string id() const override { return "llm:" + client_->model(); }
    std::string generate(const AnswerInput& input) const override;

private:
    std::shared_ptr<ChatClient> client_;
};

// Thrown by QaEngine::answer when generation fails; carries the evidence.
class AnswerError : public Error {
public:
    AnswerError(const std::string& what, QaExchange partial)
        : Error(Errc::Upstream, what), partial_(std::move(partial)) {}
    const QaExchange& partial() const { return partial_; }

private:
    QaExchange partial_;
};

struct Retrieval {
    std::vector<EvidenceItem> evidence;
    std::vector<std::string> anchors;  // empty when the latest-visit fallback was used
    std::int64_t version = 0;
};

struct CompareResult {
    QaExchange baseline;
    QaExchange confidence_aware;
    std::vector<std::string> evidence_diff;  // symmetric difference of evidence keys
    std::vector<std::string> filtered_out;   // baseline evidence below tau
};

void to_json(json& j, const CompareResult& c);

struct QaOptions {
    PromptTemplate system{prompts::kAnswerSystem};
    PromptTemplate user{prompts::kAnswerUser};
    std::function<std::string()> clock;  // ISO-8601 timestamps; defaults to UTC now
};

class QaEngine {
public:
    QaEngine(std::shared_ptr<const KgStore> store, std::shared_ptr<const ConceptDictionary> dictionary,
             std::shared_ptr<const AnswerGenerator> generator, QaOptions options = {});

    // Anchor-and-hop retrieval. Throws Errc::NotFound for an unknown subject.
    Retrieval retrieve(const QaRequest& request) const;
    // Throws AnswerError if the generator fails.
    QaExchange answer(const QaRequest& request, const Retrieval& retrieval) const;
    QaExchange ask(const QaRequest& request) const { return answer(request, retrieve(request)); }

    // Both pipelines on the same question. Generation failures are recorded
    // per exchange rather than thrown.
    CompareResult compare(const std::string& subject_id, const std::string& question, std::optional<double> tau,
                          std::size_t top_k) const;

    ChatRequest render_prompt(const QaRequest& request, const std::vector<EvidenceItem>& evidence) const;

private:
    std::shared_ptr<const KgStore> store_;
    std::shared_ptr<const ConceptDictionary> dictionary_;
    std::shared_ptr<const AnswerGenerator> generator_;
    QaOptions options_;
};

// Question-side anchors: dictionary surface forms plus category words such
// as "medications" that expand to every entity of that type in the graph.
std::vector<std::string> find_anchors(const std::string& question, const ConceptDictionary& dict,
                                      const GraphVariant& graph);

std::string format_confidence(double c);  // two fraction digits

struct WhatIfResult {
    std::string name;
    std::string subject_id;
    CompareResult result;
    std::optional<std::string> injected;  // declared noise triple key
    bool injected_in_baseline = false;
    bool injected_in_confidence_aware = false;
};

void to_json(json& j, const WhatIfResult& r);

// Executes scripted ingest-and-ask scenarios, each in a throwaway store.
class WhatIfRunner {
public:
    WhatIfRunner(std::shared_ptr<const ConceptDictionary> dictionary, std::shared_ptr<const StaticKg> static_kg,
                 std::shared_ptr<const TripleScorer> scorer, std::shared_ptr<const AnswerGenerator> generator,
                 QaOptions options = {});

    // Accepts {"scenarios": [...]} or a bare array. Errors name the scenario.
    std::vector<WhatIfResult> run(const json& scenarios) const;
    std::vector<WhatIfResult> run_file(const std::filesystem::path& path) const;

private:
    std::shared_ptr<const ConceptDictionary> dictionary_;
    std::shared_ptr<const StaticKg> static_kg_;
    std::shared_ptr<const TripleScorer> scorer_;
    std::shared_ptr<const AnswerGenerator> generator_;
    QaOptions options_;
};

} // namespace dkg
