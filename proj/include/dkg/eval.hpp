#pragma once
// Outcome-prediction evaluation over graph variants.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dkg/ingest.hpp"
#include "dkg/llm.hpp"
#include "dkg/store.hpp"

namespace dkg {

// Probability that a random positive outranks a random negative, ties
// counting one half. Throws Errc::Validation when only one class is present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision with tied scores treated as one threshold: every positive
// in a tie group receives the precision at the bottom of that group.
// Throws Errc::Validation when there is no positive.
double auprc(std::span<const double> scores, std::span<const int> labels);

enum class RiskGenerator { RuleBased, Hash, Llm };

std::string_view to_string(RiskGenerator g);
RiskGenerator parse_risk_generator(std::string_view s);

struct PredictorConfig {
    VariantKind variant = VariantKind::Historical;
    std::optional<double> tau;  // Filtered only
    RiskGenerator generator = RiskGenerator::RuleBased;
    std::set<std::string> risk_relations{"diagnosed_with", "underwent", "prescribed"};
    std::set<std::string> risk_concepts;  // empty = any tail counts
    double fallback = 0.5;
};

struct RiskPrediction {
    double risk = 0.0;
    bool fallback = false;
};

class RiskPredictor {
public:
    explicit RiskPredictor(std::shared_ptr<ChatClient> client = nullptr,
                           PromptTemplate system = PromptTemplate(prompts::kRiskSystem),
                           PromptTemplate user = PromptTemplate(prompts::kRiskUser));

    // Rule-based: 1 - exp(-sum of weights) over risk triples, weight 1 for
    // unscored edges and the confidence for scored ones. Hash: seeded
    // pseudo-probability of the serialized graph. Llm: {"risk": p} reply.
    RiskPrediction predict(const GraphVariant& graph, const PredictorConfig& cfg, std::uint64_t seed) const;

    ChatRequest risk_prompt(const GraphVariant& graph) const;

private:
    std::shared_ptr<ChatClient> client_;
    PromptTemplate system_;
    PromptTemplate user_;
};

RiskPrediction predict_risk(const std::string& subject_id, const PredictorConfig& cfg, const KgStore& store,
                            const RiskPredictor& predictor, std::uint64_t seed = 0);

struct PredictionTask {
    std::vector<std::string> subject_ids;
    std::map<std::string, int> labels;
    PredictorConfig predictor;
    int runs = 3;
    std::uint64_t seed = 0;  // run r uses seed + r

    void validate() const;
};

struct RunMetrics {
    double auprc = 0.0;
    double auroc = 0.0;
};

struct MetricReport {
    double auprc = 0.0;  // mean over runs
    double auroc = 0.0;
    std::vector<RunMetrics> per_run;
    std::size_t n_subjects = 0;
    std::size_t n_fallbacks = 0;
};

MetricReport evaluate(const PredictionTask& task, const KgStore& store, const RiskPredictor& predictor);

struct SweepRow {
    std::string method;
    VariantKind variant;
    std::optional<double> tau;
    MetricReport report;
};

// {0.0, 0.1, ..., 1.0}
std::vector<double> default_tau_grid();

// Historical baseline, ConfidenceAware, then one Filtered row per tau.
std::vector<SweepRow> run_sweep(const PredictionTask& task, const std::vector<double>& taus, const KgStore& store,
                                const RiskPredictor& predictor);

// Columns: method, variant, tau, auprc, auroc.
std::string sweep_csv(const std::vector<SweepRow>& rows);
json sweep_json(const std::vector<SweepRow>& rows);

// ---- synthetic corpus ----------------------------------------------------

struct CorpusSpec {
    std::uint64_t seed = 7;
    int n_subjects = 20;
    int visits_per_subject = 5;
    double noise_rate = 0.3;

    void validate() const;
};

enum class NoiseKind { SingleEvidence, Conflicting, Stale };

std::string_view to_string(NoiseKind k);

struct NoiseInjection {
    std::string subject_id;
    int visit_index = 0;
    NoiseKind kind = NoiseKind::SingleEvidence;
    std::string mention;
    std::string relation;  // relation the mention lands on
};

struct Corpus {
    std::vector<SubjectRecord> records;
    std::map<std::string, int> labels;
    std::vector<NoiseInjection> noise;
    // Persistent label-correlated risk concept per positive subject.
    std::map<std::string, std::string> planted_risk;
};

Corpus generate_corpus(const CorpusSpec& spec);

// Writes records.jsonl and labels.json into `dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
std::map<std::string, int> read_labels(const std::filesystem::path& path);

// Mentions whose concepts count as outcome risk in the bundled dictionary.
const std::vector<std::string>& risk_mentions();
// Concept ids matching risk_mentions() in the bundled dictionary.
std::set<std::string> default_risk_concepts();

} // namespace dkg
