#pragma once
// Triple confidence scoring and the two score-bearing variants.
//
// The heuristic scorer combines four evidence signals into
//
//   s = clamp(w_src*q_src + w_rep*rep + w_cooc*cooc + w_temp*temp, 0, 1)
//
//   q_src = best source prior among the triple's evidence
//   rep   = min(n_obs, rep_cap) / rep_cap,         n_obs = |evidence|
//   cooc  = (n_support + 1) / (n_support + n_conflict + 2)
//   temp  = exp(-lambda * (now - last_seen))
//
// The LLM scorer sends the same context to a chat endpoint and falls back to
// the heuristic whenever the endpoint fails or answers out of contract.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dkg/graph.hpp"
#include "dkg/llm.hpp"

namespace dkg {

struct ScorerWeights {
    double source = 0.25;
    double repetition = 0.35;
    double cooccurrence = 0.20;
    double temporal = 0.20;
};

struct ScorerConfig {
    ScorerWeights weights;
    std::map<SourceKind, double> source_priors{
        {SourceKind::Structured, 0.8}, {SourceKind::FreeText, 0.5}, {SourceKind::Static, 0.9}};
    double recency_lambda = 0.1;
    int rep_cap = 5;
    std::size_t max_context = 32;
    double default_on_failure = 0.5;
    // Unordered pairs of relations that cannot hold on the same (head, tail).
    std::vector<std::pair<std::string, std::string>> exclusive_relations{
        {"diagnosed_with", "underwent"},
        {"diagnosed_with", "prescribed"},
        {"underwent", "prescribed"},
        {"synonym_of", "is_a"},
    };

    // Throws Errc::Validation unless weights sum to 1 (1e-9), priors lie in
    // [0,1], lambda > 0, rep_cap >= 1 and default_on_failure lies in [0,1].
    void validate() const;
    bool exclusive(const std::string& a, const std::string& b) const;
    double prior(SourceKind kind) const;
};

void to_json(json& j, const ScorerConfig& c);
void from_json(const json& j, ScorerConfig& c);

class FilterThreshold {
public:
    // Throws Errc::BadRequest outside [0,1].
    explicit FilterThreshold(double tau);
    double value() const { return tau_; }

private:
    double tau_;
};

struct EvidenceSource {
    SourceKind kind = SourceKind::Structured;
    std::optional<int> visit_index;  // empty for static knowledge
};

// Resolves evidence ids to their origin. "static:*" ids are always Static.
class SourceIndex {
public:
    void add(const std::string& record_id, SourceKind kind, int visit_index);
    std::optional<EvidenceSource> lookup(const std::string& evidence_id) const;

private:
    std::map<std::string, EvidenceSource> records_;
};

struct ScoringEnv {
    int now = 0;  // visit index of the commit being scored
    const SourceIndex* sources = nullptr;
};

struct ScoringContext {
    Triple target;
    std::vector<Triple> current_triples;
    std::vector<Triple> past_triples;
    std::size_t max_size = 32;

    std::size_t size() const { return current_triples.size() + past_triples.size(); }
};

// Adjacency over a variant for repeated context construction.
class GraphIndex {
public:
    explicit GraphIndex(const GraphVariant& graph);
    const std::vector<const Triple*>& incident(const std::string& node) const;

private:
    std::map<std::string, std::vector<const Triple*>> incident_;
    std::vector<const Triple*> none_;
};

// 1-hop neighbours of the target's endpoints: triples first seen at `now`
// (key order) ahead of older ones (newest first, then key order), capped.
ScoringContext build_context(const Triple& target, const GraphIndex& index, int now, std::size_t max_size);
ScoringContext build_context(const Triple& target, const GraphVariant& graph, int now, std::size_t max_size);

struct HeuristicSignals {
    double source = 0.0;
    double repetition = 0.0;
    double cooccurrence = 0.0;
    double temporal = 0.0;
    std::size_t n_obs = 0;
    int last_seen = 0;
    std::vector<TripleKey> supporting;
    std::vector<TripleKey> conflicting;
};

HeuristicSignals heuristic_signals(const Triple& target, const ScoringContext& ctx, const ScorerConfig& cfg,
                                   const ScoringEnv& env);
double combine_signals(const HeuristicSignals& s, const ScorerConfig& cfg);

ScoredTriple score_heuristic(const Triple& target, const ScoringContext& ctx, const ScorerConfig& cfg,
                             const ScoringEnv& env);

class TripleScorer {
public:
    virtual ~TripleScorer() = default;
    virtual ScoredTriple score(const Triple& target, const ScoringContext& ctx, const ScoringEnv& env) const = 0;
    virtual const ScorerConfig& config() const = 0;
};

class HeuristicScorer final : public TripleScorer {
public:
    explicit HeuristicScorer(ScorerConfig cfg = {});
    ScoredTriple score(const Triple& target, const ScoringContext& ctx, const ScoringEnv& env) const override;
    const ScorerConfig& config() const override { return cfg_; }

private:
    ScorerConfig cfg_;
};

struct LlmScoringOptions {
    int retries = 2;            // extra attempts after the first
    bool score_static = false;  // static-origin triples keep the heuristic prior
    PromptTemplate system{prompts::kScoreSystem};
    PromptTemplate user{prompts::kScoreUser};
};

// Serialized prompt for one scoring call.
ChatRequest scoring_prompt(const Triple& target, const ScoringContext& ctx, const LlmScoringOptions& options);

// Never throws for endpoint problems: after the retries it returns the
// heuristic score with "fallback:heuristic" appended to the rationale.
ScoredTriple score_llm(const Triple& target, const ScoringContext& ctx, const ScoringEnv& env, ChatClient& client,
                       const ScorerConfig& cfg, const LlmScoringOptions& options = {});

class LlmScorer final : public TripleScorer {
public:
    LlmScorer(std::shared_ptr<ChatClient> client, ScorerConfig cfg = {}, LlmScoringOptions options = {});
    ScoredTriple score(const Triple& target, const ScoringContext& ctx, const ScoringEnv& env) const override;
    const ScorerConfig& config() const override { return cfg_; }

private:
    std::shared_ptr<ChatClient> client_;
    ScorerConfig cfg_;
    LlmScoringOptions options_;
};

// Scores every triple of `enriched` once. Keys are preserved exactly.
GraphVariant materialize_confidence(const GraphVariant& enriched, const TripleScorer& scorer, const ScoringEnv& env,
                                    unsigned threads = 1);

// Keeps exactly the triples with confidence >= tau.
GraphVariant filter_by_confidence(const GraphVariant& scored, FilterThreshold tau);

} // namespace dkg
