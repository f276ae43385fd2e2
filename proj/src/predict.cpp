#include <algorithm>
#include <cmath>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "dkg/confidence.hpp"
#include "dkg/error.hpp"
#include "dkg/eval.hpp"
#include "dkg/qa.hpp"

namespace dkg {

namespace {

// FNV-1a, stable across platforms.
std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string format_tau(const std::optional<double>& tau) {
    if (!tau) return "";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f", *tau);
    return buf;
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::string_view to_string(RiskGenerator g) {
    switch (g) {
        case RiskGenerator::RuleBased: return "rule";
        case RiskGenerator::Hash: return "hash";
        case RiskGenerator::Llm: return "llm";
    }
    return "rule";
}

RiskGenerator parse_risk_generator(std::string_view s) {
    if (s == "rule" || s == "rule-based" || s == "rule_based") return RiskGenerator::RuleBased;
    if (s == "hash") return RiskGenerator::Hash;
    if (s == "llm") return RiskGenerator::Llm;
    fail(Errc::Validation, "unknown risk generator: " + std::string(s));
}

RiskPredictor::RiskPredictor(std::shared_ptr<ChatClient> client, PromptTemplate system, PromptTemplate user)
    : client_(std::move(client)), system_(std::move(system)), user_(std::move(user)) {}

ChatRequest RiskPredictor::risk_prompt(const GraphVariant& graph) const {
    std::string lines;
    for (const auto* t : graph.edges()) {
        auto label = [&](const std::string& id) {
            auto it = graph.entities.find(id);
            return it == graph.entities.end() ? id : it->second.label;
        };
        lines += "- " + label(t->head) + " " + t->relation + " " + label(t->tail) + " (visit " +
                 std::to_string(t->first_seen) + ")";
        if (graph.score_bearing()) lines += " [confidence " + format_confidence(graph.scored.at(t->key()).confidence) + "]";
        lines += '\n';
    }
    const std::map<std::string, std::string> values{{"variant", std::string(to_string(graph.kind))},
                                                    {"triples", lines}};
    return {system_.render(values), user_.render(values)};
}

RiskPrediction RiskPredictor::predict(const GraphVariant& graph, const PredictorConfig& cfg,
                                      std::uint64_t seed) const {
    switch (cfg.generator) {
        case RiskGenerator::RuleBased: {
            double mass = 0.0;
            for (const auto* t : graph.edges()) {
                if (!cfg.risk_relations.contains(t->relation)) continue;
                if (!cfg.risk_concepts.empty() && !cfg.risk_concepts.contains(t->tail)) continue;
                mass += graph.score_bearing() ? graph.scored.at(t->key()).confidence : 1.0;
            }
            return {1.0 - std::exp(-mass), false};
        }
        case RiskGenerator::Hash: {
            json keys = json::array();
            for (const auto& k : graph.keys()) keys.push_back(k.str());
            auto h = fnv1a(std::to_string(seed));
            h = fnv1a(graph.subject_id, h);
            h = fnv1a(keys.dump(), h);
            return {static_cast<double>(h >> 11) / 9007199254740992.0, false};
        }
        case RiskGenerator::Llm: {
            if (!client_) fail(Errc::Validation, "LLM risk generator requires a client");
            try {
                const auto parsed = parse_strict_object(client_->complete(risk_prompt(graph)));
                if (parsed && parsed->contains("risk") && parsed->at("risk").is_number()) {
                    const double r = parsed->at("risk").get<double>();
                    if (std::isfinite(r)) return {std::clamp(r, 0.0, 1.0), false};
                }
                spdlog::warn("risk reply for {} is not {{\"risk\": number}}", graph.subject_id);
            } catch (const Error& e) {
                spdlog::warn("risk prediction for {} failed: {}", graph.subject_id, e.what());
            }
            return {cfg.fallback, true};
        }
    }
    return {cfg.fallback, true};
}

RiskPrediction predict_risk(const std::string& subject_id, const PredictorConfig& cfg, const KgStore& store,
                            const RiskPredictor& predictor, std::uint64_t seed) {
    const auto graph = store.get_variant(subject_id, cfg.variant, cfg.tau);
    return predictor.predict(*graph, cfg, seed);
}

void PredictionTask::validate() const {
    if (runs < 1) fail(Errc::Validation, "runs must be >= 1");
    if (subject_ids.empty()) fail(Errc::Validation, "prediction task has no subjects");
    for (const auto& s : subject_ids) {
        if (!labels.contains(s)) fail(Errc::Validation, "subject without label: " + s);
    }
}

MetricReport evaluate(const PredictionTask& task, const KgStore& store, const RiskPredictor& predictor) {
    task.validate();
    MetricReport report;
    report.n_subjects = task.subject_ids.size();

    std::vector<int> labels;
    for (const auto& s : task.subject_ids) labels.push_back(task.labels.at(s));

    for (int r = 0; r < task.runs; ++r) {
        std::vector<double> scores;
        scores.reserve(task.subject_ids.size());
        for (const auto& s : task.subject_ids) {
            const auto p = predict_risk(s, task.predictor, store, predictor, task.seed + static_cast<std::uint64_t>(r));
            report.n_fallbacks += p.fallback ? 1 : 0;
            scores.push_back(p.risk);
        }
        report.per_run.push_back({auprc(scores, labels), auroc(scores, labels)});
    }
    for (const auto& m : report.per_run) {
        report.auprc += m.auprc;
        report.auroc += m.auroc;
    }
    report.auprc /= static_cast<double>(report.per_run.size());
    report.auroc /= static_cast<double>(report.per_run.size());
    return report;
}

std::vector<double> default_tau_grid() {
    std::vector<double> taus;
    for (int i = 0; i <= 10; ++i) taus.push_back(i / 10.0);
    return taus;
}

std::vector<SweepRow> run_sweep(const PredictionTask& task, const std::vector<double>& taus, const KgStore& store,
                                const RiskPredictor& predictor) {
    std::vector<SweepRow> rows;
    auto run = [&](std::string method, VariantKind kind, std::optional<double> tau) {
        PredictionTask t = task;
        t.predictor.variant = kind;
        t.predictor.tau = tau;
        rows.push_back({std::move(method), kind, tau, evaluate(t, store, predictor)});
    };
    run("Baseline", VariantKind::Historical, std::nullopt);
    run("+ confidence score", VariantKind::ConfidenceAware, std::nullopt);
    for (double tau : taus) {
        FilterThreshold check(tau);
        run("+ threshold", VariantKind::Filtered, check.value());
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "method,variant,tau,auprc,auroc\n";
    for (const auto& r : rows) {
        out += r.method + "," + std::string(to_string(r.variant)) + "," + format_tau(r.tau) + "," +
               format_metric(r.report.auprc) + "," + format_metric(r.report.auroc) + "\n";
    }
    return out;
}

json sweep_json(const std::vector<SweepRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json per_run = json::array();
        for (const auto& m : r.report.per_run) per_run.push_back({{"auprc", m.auprc}, {"auroc", m.auroc}});
        out.push_back({{"method", r.method},
                       {"variant", to_string(r.variant)},
                       {"tau", r.tau ? json(*r.tau) : json(nullptr)},
                       {"auprc", r.report.auprc},
                       {"auroc", r.report.auroc},
                       {"per_run", per_run},
                       {"n_subjects", r.report.n_subjects},
                       {"n_fallbacks", r.report.n_fallbacks}});
    }
    return json{{"schema_version", 1}, {"rows", out}};
}

} // namespace dkg
