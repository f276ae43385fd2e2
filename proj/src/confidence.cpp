#include "dkg/confidence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "dkg/error.hpp"

namespace dkg {

namespace {

bool shares_endpoint(const Triple& a, const Triple& b) {
    return a.head == b.head || a.head == b.tail || a.tail == b.head || a.tail == b.tail;
}

std::string format_signals(const HeuristicSignals& s, double score) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "score=%.3f source=%.2f repetition=%.2f cooccurrence=%.2f temporal=%.2f "
                  "(observations=%zu support=%zu conflict=%zu last_seen=%d)",
                  score, s.source, s.repetition, s.cooccurrence, s.temporal, s.n_obs, s.supporting.size(),
                  s.conflicting.size(), s.last_seen);
    return buf;
}

json triple_brief(const Triple& t) {
    return json{{"head", t.head},
                {"relation", t.relation},
                {"tail", t.tail},
                {"first_seen", t.first_seen},
                {"observations", t.evidence.size()}};
}

bool static_only(const Triple& t) {
    return !t.evidence.empty() && std::all_of(t.evidence.begin(), t.evidence.end(), [](const std::string& e) {
        return e.rfind("static:", 0) == 0;
    });
}

} // namespace

void ScorerConfig::validate() const {
    const auto& w = weights;
    for (double v : {w.source, w.repetition, w.cooccurrence, w.temporal}) {
        if (!(v >= 0.0)) fail(Errc::Validation, "scorer weights must be non-negative");
    }
    const double sum = w.source + w.repetition + w.cooccurrence + w.temporal;
    if (std::abs(sum - 1.0) > 1e-9) fail(Errc::Validation, "scorer weights must sum to 1");
    for (const auto& [kind, p] : source_priors) {
        if (!(p >= 0.0 && p <= 1.0)) fail(Errc::Validation, "source prior out of [0,1]");
    }
    for (auto kind : {SourceKind::Structured, SourceKind::FreeText, SourceKind::Static}) {
        if (!source_priors.contains(kind)) {
            fail(Errc::Validation, "missing source prior for " + std::string(to_string(kind)));
        }
    }
    if (!(recency_lambda > 0.0)) fail(Errc::Validation, "recency_lambda must be > 0");
    if (rep_cap < 1) fail(Errc::Validation, "rep_cap must be >= 1");
    if (max_context < 1) fail(Errc::Validation, "max_context must be >= 1");
    if (!(default_on_failure >= 0.0 && default_on_failure <= 1.0)) {
        fail(Errc::Validation, "default_on_failure out of [0,1]");
    }
}

bool ScorerConfig::exclusive(const std::string& a, const std::string& b) const {
    return std::any_of(exclusive_relations.begin(), exclusive_relations.end(), [&](const auto& p) {
        return (p.first == a && p.second == b) || (p.first == b && p.second == a);
    });
}

double ScorerConfig::prior(SourceKind kind) const {
    auto it = source_priors.find(kind);
    return it == source_priors.end() ? 0.0 : it->second;
}

void to_json(json& j, const ScorerConfig& c) {
    json priors = json::object();
    for (const auto& [k, v] : c.source_priors) priors[std::string(to_string(k))] = v;
    json pairs = json::array();
    for (const auto& [a, b] : c.exclusive_relations) pairs.push_back({a, b});
    j = json{{"weights", {c.weights.source, c.weights.repetition, c.weights.cooccurrence, c.weights.temporal}},
             {"source_priors", priors},
             {"recency_lambda", c.recency_lambda},
             {"rep_cap", c.rep_cap},
             {"max_context", c.max_context},
             {"default_on_failure", c.default_on_failure},
             {"exclusive_relations", pairs}};
}

void from_json(const json& j, ScorerConfig& c) {
    if (j.contains("weights")) {
        const auto w = j.at("weights").get<std::vector<double>>();
        if (w.size() != 4) fail(Errc::Validation, "weights must list (source, repetition, cooccurrence, temporal)");
        c.weights = {w[0], w[1], w[2], w[3]};
    }
    if (j.contains("source_priors")) {
        for (const auto& [k, v] : j.at("source_priors").items()) c.source_priors[parse_source_kind(k)] = v.get<double>();
    }
    c.recency_lambda = j.value("recency_lambda", c.recency_lambda);
    c.rep_cap = j.value("rep_cap", c.rep_cap);
    c.max_context = j.value("max_context", c.max_context);
    c.default_on_failure = j.value("default_on_failure", c.default_on_failure);
    if (j.contains("exclusive_relations")) {
        c.exclusive_relations.clear();
        for (const auto& p : j.at("exclusive_relations")) {
            c.exclusive_relations.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
        }
    }
}

FilterThreshold::FilterThreshold(double tau) : tau_(tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) fail(Errc::BadRequest, "tau must lie in [0,1]");
}

void SourceIndex::add(const std::string& record_id, SourceKind kind, int visit_index) {
    records_[record_id] = EvidenceSource{kind, visit_index};
}

std::optional<EvidenceSource> SourceIndex::lookup(const std::string& evidence_id) const {
    if (evidence_id.rfind("static:", 0) == 0) return EvidenceSource{SourceKind::Static, std::nullopt};
    auto it = records_.find(evidence_id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

GraphIndex::GraphIndex(const GraphVariant& graph) {
    for (const auto* t : graph.edges()) {
        incident_[t->head].push_back(t);
        if (t->tail != t->head) incident_[t->tail].push_back(t);
    }
}

const std::vector<const Triple*>& GraphIndex::incident(const std::string& node) const {
    auto it = incident_.find(node);
    return it == incident_.end() ? none_ : it->second;
}

ScoringContext build_context(const Triple& target, const GraphIndex& index, int now, std::size_t max_size) {
    ScoringContext ctx;
    ctx.target = target;
    ctx.max_size = max_size;

    const auto target_key = target.key();
    std::set<TripleKey> seen{target_key};
    std::vector<const Triple*> current;
    std::vector<const Triple*> past;
    for (const auto* node : {&target.head, &target.tail}) {
        for (const auto* t : index.incident(*node)) {
            if (!seen.insert(t->key()).second) continue;
            (t->first_seen >= now ? current : past).push_back(t);
        }
    }
    std::sort(current.begin(), current.end(), [](const Triple* a, const Triple* b) { return a->key() < b->key(); });
    std::sort(past.begin(), past.end(), [](const Triple* a, const Triple* b) {
        if (a->first_seen != b->first_seen) return a->first_seen > b->first_seen;
        return a->key() < b->key();
    });

    for (const auto* t : current) {
        if (ctx.size() >= max_size) break;
        ctx.current_triples.push_back(*t);
    }
    for (const auto* t : past) {
        if (ctx.size() >= max_size) break;
        ctx.past_triples.push_back(*t);
    }
    return ctx;
}

ScoringContext build_context(const Triple& target, const GraphVariant& graph, int now, std::size_t max_size) {
    return build_context(target, GraphIndex(graph), now, max_size);
}

HeuristicSignals heuristic_signals(const Triple& target, const ScoringContext& ctx, const ScorerConfig& cfg,
                                   const ScoringEnv& env) {
    HeuristicSignals s;

    // Unresolvable evidence is treated as the weakest record source.
    s.source = target.evidence.empty() ? cfg.prior(SourceKind::FreeText) : 0.0;
    bool have_seen = false;
    int last_seen = target.first_seen;
    for (const auto& id : target.evidence) {
        auto src = env.sources ? env.sources->lookup(id) : std::nullopt;
        if (!src && id.rfind("static:", 0) == 0) src = EvidenceSource{SourceKind::Static, std::nullopt};
        const auto kind = src ? src->kind : SourceKind::FreeText;
        s.source = std::max(s.source, cfg.prior(kind));
        // Curated knowledge does not age.
        const int seen = !src ? target.first_seen : src->visit_index.value_or(env.now);
        last_seen = have_seen ? std::max(last_seen, seen) : seen;
        have_seen = true;
    }
    s.last_seen = last_seen;

    s.n_obs = target.evidence.size();
    s.repetition = static_cast<double>(std::min<std::size_t>(s.n_obs, static_cast<std::size_t>(cfg.rep_cap))) /
                   static_cast<double>(cfg.rep_cap);

    auto visit = [&](const Triple& c) {
        if (c.head == target.head && c.tail == target.tail && cfg.exclusive(target.relation, c.relation)) {
            s.conflicting.push_back(c.key());
        } else if (shares_endpoint(c, target)) {
            s.supporting.push_back(c.key());
        }
    };
    for (const auto& c : ctx.current_triples) visit(c);
    for (const auto& c : ctx.past_triples) visit(c);
    const double n_support = static_cast<double>(s.supporting.size());
    const double n_conflict = static_cast<double>(s.conflicting.size());
    s.cooccurrence = (n_support + 1.0) / (n_support + n_conflict + 2.0);

    const double dt = std::max(0, env.now - last_seen);
    s.temporal = std::exp(-cfg.recency_lambda * dt);
    return s;
}

double combine_signals(const HeuristicSignals& s, const ScorerConfig& cfg) {
    const auto& w = cfg.weights;
    const double raw = w.source * s.source + w.repetition * s.repetition + w.cooccurrence * s.cooccurrence +
                       w.temporal * s.temporal;
    if (std::isnan(raw)) return cfg.default_on_failure;
    return std::clamp(raw, 0.0, 1.0);
}

ScoredTriple score_heuristic(const Triple& target, const ScoringContext& ctx, const ScorerConfig& cfg,
                             const ScoringEnv& env) {
    auto signals = heuristic_signals(target, ctx, cfg, env);
    ScoredTriple out;
    out.triple = target;
    out.confidence = combine_signals(signals, cfg);
    out.rationale = format_signals(signals, out.confidence);
    out.supporting = std::move(signals.supporting);
    out.conflicting = std::move(signals.conflicting);
    return out;
}

HeuristicScorer::HeuristicScorer(ScorerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ScoredTriple HeuristicScorer::score(const Triple& target, const ScoringContext& ctx, const ScoringEnv& env) const {
    return score_heuristic(target, ctx, cfg_, env);
}

ChatRequest scoring_prompt(const Triple& target, const ScoringContext& ctx, const LlmScoringOptions& options) {
    json context = json::array();
    for (const auto& t : ctx.current_triples) {
        auto b = triple_brief(t);
        b["scope"] = "current";
        context.push_back(std::move(b));
    }
    for (const auto& t : ctx.past_triples) {
        auto b = triple_brief(t);
        b["scope"] = "past";
        context.push_back(std::move(b));
    }
    const std::map<std::string, std::string> values{
        {"target", triple_brief(target).dump()},
        {"context", context.dump(2)},
        {"evidence", json(target.evidence).dump()},
    };
    return {options.system.render(values), options.user.render(values)};
}

ScoredTriple score_llm(const Triple& target, const ScoringContext& ctx, const ScoringEnv& env, ChatClient& client,
                       const ScorerConfig& cfg, const LlmScoringOptions& options) {
    const auto request = scoring_prompt(target, ctx, options);
    std::string problem;
    for (int attempt = 0; attempt <= options.retries; ++attempt) {
        std::string content;
        try {
            content = client.complete(request);
        } catch (const Error& e) {
            problem = e.what();
            continue;
        }
        auto parsed = parse_strict_object(content);
        if (!parsed || !parsed->contains("score") || !parsed->at("score").is_number() ||
            (parsed->contains("rationale") && !parsed->at("rationale").is_string())) {
            problem = "response is not {\"score\": number, \"rationale\": string}";
            continue;
        }
        double score = parsed->at("score").get<double>();
        if (!std::isfinite(score)) {
            problem = "non-finite score";
            continue;
        }
        if (score < 0.0 || score > 1.0) {
            spdlog::warn("LLM score {} for {} outside [0,1]; clamped", score, target.key().str());
            score = std::clamp(score, 0.0, 1.0);
        }
        auto signals = heuristic_signals(target, ctx, cfg, env);
        ScoredTriple out;
        out.triple = target;
        out.confidence = score;
        out.rationale = parsed->value("rationale", "");
        out.supporting = std::move(signals.supporting);
        out.conflicting = std::move(signals.conflicting);
        return out;
    }
    spdlog::warn("LLM scoring failed for {} ({}); using heuristic", target.key().str(), problem);
    auto out = score_heuristic(target, ctx, cfg, env);
    out.rationale += "; fallback:heuristic";
    return out;
}

LlmScorer::LlmScorer(std::shared_ptr<ChatClient> client, ScorerConfig cfg, LlmScoringOptions options)
    : client_(std::move(client)), cfg_(std::move(cfg)), options_(std::move(options)) {
    cfg_.validate();
    if (!client_) fail(Errc::Validation, "LLM scorer requires a client");
}

ScoredTriple LlmScorer::score(const Triple& target, const ScoringContext& ctx, const ScoringEnv& env) const {
    if (!options_.score_static && static_only(target)) return score_heuristic(target, ctx, cfg_, env);
    return score_llm(target, ctx, env, *client_, cfg_, options_);
}

GraphVariant materialize_confidence(const GraphVariant& enriched, const TripleScorer& scorer, const ScoringEnv& env,
                                    unsigned threads) {
    GraphVariant out;
    out.kind = VariantKind::ConfidenceAware;
    out.subject_id = enriched.subject_id;
    out.version = enriched.version;
    out.entities = enriched.entities;

    const auto edges = enriched.edges();
    const GraphIndex index(enriched);
    const auto max_context = scorer.config().max_context;
    std::vector<ScoredTriple> results(edges.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < edges.size(); i = next++) {
            const auto ctx = build_context(*edges[i], index, env.now, max_context);
            results[i] = scorer.score(*edges[i], ctx, env);
        }
    };
    const unsigned n = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::max<std::size_t>(1, edges.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    }

    for (auto& r : results) {
        r.confidence = std::clamp(r.confidence, 0.0, 1.0);
        out.scored.emplace(r.triple.key(), std::move(r));
    }
    return out;
}

GraphVariant filter_by_confidence(const GraphVariant& scored, FilterThreshold tau) {
    if (!scored.score_bearing()) fail(Errc::Validation, "filter requires a score-bearing variant");
    GraphVariant out;
    out.kind = VariantKind::Filtered;
    out.subject_id = scored.subject_id;
    out.version = scored.version;
    out.tau = tau.value();
    for (const auto& [k, s] : scored.scored) {
        if (s.confidence >= tau.value()) out.scored.emplace(k, s);
    }
    out.entities = entities_for(out, scored.entities);
    return out;
}

} // namespace dkg
