#include "dkg/qa.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>

#include "dkg/error.hpp"

namespace dkg {

namespace {

const std::map<std::string, EntityType>& category_words() {
    static const std::map<std::string, EntityType> words{
        {"medication", EntityType::Medication}, {"medications", EntityType::Medication},
        {"medicine", EntityType::Medication},   {"medicines", EntityType::Medication},
        {"drug", EntityType::Medication},       {"drugs", EntityType::Medication},
        {"prescription", EntityType::Medication}, {"prescriptions", EntityType::Medication},
        {"diagnosis", EntityType::Disease},     {"diagnoses", EntityType::Disease},
        {"disease", EntityType::Disease},       {"diseases", EntityType::Disease},
        {"condition", EntityType::Disease},     {"conditions", EntityType::Disease},
        {"procedure", EntityType::Procedure},   {"procedures", EntityType::Procedure},
        {"surgery", EntityType::Procedure},     {"surgeries", EntityType::Procedure},
    };
    return words;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string label_of(const GraphVariant& g, const std::string& id) {
    auto it = g.entities.find(id);
    return it == g.entities.end() ? id : it->second.label;
}

std::string evidence_line(const EvidenceItem& e, bool with_score) {
    std::string line = "- " + e.head_label + " " + e.triple.relation + " " + e.tail_label +
                       " (visit " + std::to_string(e.triple.first_seen) + ")";
    if (with_score && e.confidence) line += " [confidence " + format_confidence(*e.confidence) + "]";
    return line;
}

std::vector<std::string> evidence_keys(const QaExchange& e) {
    std::vector<std::string> keys;
    for (const auto& item : e.evidence) keys.push_back(item.triple.key().str());
    std::sort(keys.begin(), keys.end());
    return keys;
}

} // namespace

std::string_view to_string(QaMode m) { return m == QaMode::Baseline ? "baseline" : "confidence_aware"; }

QaMode parse_qa_mode(std::string_view s) {
    std::string k;
    for (char c : s) {
        if (c != '_' && c != '-' && c != ' ') k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (k == "baseline") return QaMode::Baseline;
    if (k == "confidenceaware") return QaMode::ConfidenceAware;
    fail(Errc::Validation, "unknown QA mode: " + std::string(s));
}

std::string format_confidence(double c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", c);
    return buf;
}

void QaRequest::validate() const {
    if (subject_id.empty()) fail(Errc::Validation, "subject_id is required");
    if (top_k < 1) fail(Errc::Validation, "top_k must be >= 1");
    if (tau) {
        if (mode != QaMode::ConfidenceAware) fail(Errc::Validation, "tau is only valid in confidence_aware mode");
        if (!(*tau >= 0.0 && *tau <= 1.0)) fail(Errc::Validation, "tau must lie in [0,1]");
    }
    if (include_scores_in_prompt && *include_scores_in_prompt != scores_in_prompt()) {
        fail(Errc::Validation, mode == QaMode::Baseline ? "baseline prompts never carry confidence scores"
                                                        : "confidence-aware prompts always carry confidence scores");
    }
}

void to_json(json& j, const QaRequest& r) {
    j = json{{"subject_id", r.subject_id},
             {"question", r.question},
             {"mode", to_string(r.mode)},
             {"top_k", r.top_k},
             {"include_scores_in_prompt", r.scores_in_prompt()}};
    j["tau"] = r.tau ? json(*r.tau) : json(nullptr);
}

void from_json(const json& j, QaRequest& r) {
    try {
        r.subject_id = j.at("subject_id").get<std::string>();
        r.question = j.value("question", "");
        r.mode = parse_qa_mode(j.value("mode", "baseline"));
        if (j.contains("tau") && !j.at("tau").is_null()) {
            r.tau = j.at("tau").get<double>();
        } else {
            r.tau.reset();
        }
        const auto k = j.value("top_k", 5);
        if (k < 1) fail(Errc::Validation, "top_k must be >= 1");
        r.top_k = static_cast<std::size_t>(k);
        if (j.contains("include_scores_in_prompt") && !j.at("include_scores_in_prompt").is_null()) {
            r.include_scores_in_prompt = j.at("include_scores_in_prompt").get<bool>();
        }
    } catch (const json::exception& e) {
        fail(Errc::Validation, std::string("invalid QA request: ") + e.what());
    }
}

void to_json(json& j, const QaExchange& e) {
    json evidence = json::array();
    for (const auto& item : e.evidence) {
        json row{{"key", item.triple.key().str()},
                 {"head", item.triple.head},
                 {"relation", item.triple.relation},
                 {"tail", item.triple.tail},
                 {"head_label", item.head_label},
                 {"tail_label", item.tail_label},
                 {"first_seen", item.triple.first_seen},
                 {"evidence", item.triple.evidence}};
        if (item.confidence) row["confidence"] = *item.confidence;
        evidence.push_back(std::move(row));
    }
    j = json{{"request", e.request},       {"evidence", evidence},         {"anchors", e.anchors},
             {"version", e.version},       {"prompt", e.prompt},           {"answer", e.answer},
             {"generator_id", e.generator_id}, {"created_at", e.created_at}};
    if (e.error) j["error"] = *e.error;
}

void to_json(json& j, const CompareResult& c) {
    j = json{{"baseline", c.baseline},
             {"confidence_aware", c.confidence_aware},
             {"evidence_diff", c.evidence_diff},
             {"filtered_out", c.filtered_out}};
}

std::string DeterministicGenerator::generate(const AnswerInput& input) const {
    const auto& req = input.request;
    if (input.evidence.empty()) {
        return "No supporting evidence found in the knowledge graph for: " + req.question;
    }
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& e : input.evidence) {
        std::string item = e.head_label + " -> " + e.tail_label;
        if (req.scores_in_prompt() && e.confidence) item += " (" + format_confidence(*e.confidence) + ")";
        if (!groups.contains(e.triple.relation)) order.push_back(e.triple.relation);
        groups[e.triple.relation].push_back(std::move(item));
    }
    std::string out = "Based on " + std::to_string(input.evidence.size()) + " " +
                      std::string(to_string(req.mode)) + " evidence triple" +
                      (input.evidence.size() == 1 ? "" : "s") + " for subject " + req.subject_id + ":";
    for (const auto& rel : order) {
        out += "\n" + rel + ": ";
        const auto& items = groups[rel];
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i) out += "; ";
            out += items[i];
        }
    }
    return out;
}

std::string LlmGenerator::generate(const AnswerInput& input) const { return client_->complete(input.prompt); }

std::vector<std::string> find_anchors(const std::string& question, const ConceptDictionary& dict,
                                      const GraphVariant& graph) {
    std::set<std::string> anchors;
    for (const auto& ref : GazetteerExtractor{}.extract(question, dict)) {
        if (graph.entities.contains(ref.concept_id)) anchors.insert(ref.concept_id);
    }
    std::set<EntityType> categories;
    for (const auto& tok : tokenize_text(question)) {
        if (auto it = category_words().find(tok); it != category_words().end()) categories.insert(it->second);
    }
    if (!categories.empty()) {
        for (const auto& id : graph.endpoint_ids()) {
            auto it = graph.entities.find(id);
            if (it != graph.entities.end() && categories.contains(it->second.entity_type)) anchors.insert(id);
        }
    }
    return {anchors.begin(), anchors.end()};
}

QaEngine::QaEngine(std::shared_ptr<const KgStore> store, std::shared_ptr<const ConceptDictionary> dictionary,
                   std::shared_ptr<const AnswerGenerator> generator, QaOptions options)
    : store_(std::move(store)),
      dictionary_(std::move(dictionary)),
      generator_(std::move(generator)),
      options_(std::move(options)) {
    if (!options_.clock) options_.clock = utc_now;
}

Retrieval QaEngine::retrieve(const QaRequest& request) const {
    request.validate();
    const auto snap = store_->snapshot(request.subject_id);

    std::shared_ptr<const GraphVariant> graph;
    if (request.mode == QaMode::Baseline) {
        graph = snap->historical;
    } else {
        if (!snap->confidence) fail(Errc::Conflict, "confidence not yet computed");
        graph = request.tau ? std::make_shared<const GraphVariant>(
                                  filter_by_confidence(*snap->confidence, FilterThreshold(*request.tau)))
                            : snap->confidence;
    }

    Retrieval out;
    out.version = snap->version;
    out.anchors = find_anchors(request.question, *dictionary_, *graph);

    std::set<std::string> focus(out.anchors.begin(), out.anchors.end());
    if (focus.empty()) focus.insert(visit_node_id(request.subject_id, snap->last_visit));

    for (const auto* t : graph->edges()) {
        if (!focus.contains(t->head) && !focus.contains(t->tail)) continue;
        EvidenceItem item;
        item.triple = *t;
        if (graph->score_bearing()) item.confidence = graph->scored.at(t->key()).confidence;
        item.head_label = label_of(*graph, t->head);
        item.tail_label = label_of(*graph, t->tail);
        out.evidence.push_back(std::move(item));
    }

    const bool by_confidence = request.mode == QaMode::ConfidenceAware;
    std::sort(out.evidence.begin(), out.evidence.end(), [&](const EvidenceItem& a, const EvidenceItem& b) {
        if (by_confidence && *a.confidence != *b.confidence) return *a.confidence > *b.confidence;
        if (a.triple.first_seen != b.triple.first_seen) return a.triple.first_seen > b.triple.first_seen;
        return a.triple.key() < b.triple.key();
    });
    if (out.evidence.size() > request.top_k) out.evidence.resize(request.top_k);
    return out;
}

ChatRequest QaEngine::render_prompt(const QaRequest& request, const std::vector<EvidenceItem>& evidence) const {
    std::string lines;
    for (const auto& e : evidence) {
        lines += evidence_line(e, request.scores_in_prompt());
        lines += '\n';
    }
    if (lines.empty()) lines = "(no evidence retrieved)\n";
    const std::map<std::string, std::string> values{
        {"question", request.question},
        {"mode", std::string(to_string(request.mode))},
        {"evidence", lines},
        {"subject", request.subject_id},
    };
    return {options_.system.render(values), options_.user.render(values)};
}

QaExchange QaEngine::answer(const QaRequest& request, const Retrieval& retrieval) const {
    QaExchange ex;
    ex.request = request;
    ex.request.include_scores_in_prompt = request.scores_in_prompt();
    ex.evidence = retrieval.evidence;
    ex.anchors = retrieval.anchors;
    ex.version = retrieval.version;
    ex.generator_id = generator_->id();
    ex.created_at = options_.clock();
    const auto prompt = render_prompt(request, ex.evidence);
    ex.prompt = prompt.user;
    try {
        ex.answer = generator_->generate(AnswerInput{ex.request, ex.evidence, prompt});
    } catch (const Error& e) {
        ex.error = e.what();
        throw AnswerError(std::string("answer generation failed: ") + e.what(), std::move(ex));
    }
    return ex;
}

CompareResult QaEngine::compare(const std::string& subject_id, const std::string& question,
                                std::optional<double> tau, std::size_t top_k) const {
    QaRequest base{subject_id, question, QaMode::Baseline, std::nullopt, top_k, std::nullopt};
    QaRequest aware{subject_id, question, QaMode::ConfidenceAware, tau, top_k, std::nullopt};

    auto run = [&](const QaRequest& req) {
        const auto retrieval = retrieve(req);
        try {
            return answer(req, retrieval);
        } catch (const AnswerError& e) {
            return e.partial();
        }
    };

    CompareResult out;
    out.baseline = run(base);
    out.confidence_aware = run(aware);

    const auto a = evidence_keys(out.baseline);
    const auto b = evidence_keys(out.confidence_aware);
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.evidence_diff));

    if (tau) {
        const auto snap = store_->snapshot(subject_id);
        for (const auto& item : out.baseline.evidence) {
            auto it = snap->confidence->scored.find(item.triple.key());
            if (it == snap->confidence->scored.end() || it->second.confidence < *tau) {
                out.filtered_out.push_back(item.triple.key().str());
            }
        }
        std::sort(out.filtered_out.begin(), out.filtered_out.end());
    }
    return out;
}

void to_json(json& j, const WhatIfResult& r) {
    j = json{{"name", r.name}, {"subject_id", r.subject_id}, {"result", r.result}};
    if (r.injected) {
        j["injected"] = *r.injected;
        j["injected_in_baseline"] = r.injected_in_baseline;
        j["injected_in_confidence_aware"] = r.injected_in_confidence_aware;
    }
}

WhatIfRunner::WhatIfRunner(std::shared_ptr<const ConceptDictionary> dictionary,
                           std::shared_ptr<const StaticKg> static_kg, std::shared_ptr<const TripleScorer> scorer,
                           std::shared_ptr<const AnswerGenerator> generator, QaOptions options)
    : dictionary_(std::move(dictionary)),
      static_kg_(std::move(static_kg)),
      scorer_(std::move(scorer)),
      generator_(std::move(generator)),
      options_(std::move(options)) {}

std::vector<WhatIfResult> WhatIfRunner::run(const json& doc) const {
    const json& list = doc.is_object() ? doc.value("scenarios", json::array()) : doc;
    if (!list.is_array()) fail(Errc::Parse, "scenario file must hold a list of scenarios");

    std::vector<WhatIfResult> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& sc = list[i];
        const std::string name = sc.is_object() ? sc.value("name", "scenario#" + std::to_string(i))
                                                : "scenario#" + std::to_string(i);
        try {
            if (!sc.is_object()) fail(Errc::Parse, "scenario must be an object");
            WhatIfResult r;
            r.name = name;
            r.subject_id = sc.at("subject_id").get<std::string>();
            const auto question = sc.at("question").get<std::string>();
            std::optional<double> tau;
            if (sc.contains("tau") && !sc.at("tau").is_null()) tau = sc.at("tau").get<double>();
            const auto top_k = sc.value("top_k", 5);
            if (top_k < 1) fail(Errc::Validation, "top_k must be >= 1");

            auto store = std::make_shared<KgStore>();
            Engine engine(dictionary_, static_kg_, scorer_, store);
            for (const auto& rec : sc.value("records", json::array())) engine.ingest_record(rec.get<SubjectRecord>());
            if (!store->find(r.subject_id)) fail(Errc::NotFound, "unknown subject " + r.subject_id);

            QaEngine qa(store, dictionary_, generator_, options_);
            r.result = qa.compare(r.subject_id, question, tau, static_cast<std::size_t>(top_k));
            if (sc.contains("injected")) {
                r.injected = sc.at("injected").get<std::string>();
                auto has = [&](const QaExchange& ex) {
                    return std::any_of(ex.evidence.begin(), ex.evidence.end(),
                                       [&](const EvidenceItem& e) { return e.triple.key().str() == *r.injected; });
                };
                r.injected_in_baseline = has(r.result.baseline);
                r.injected_in_confidence_aware = has(r.result.confidence_aware);
            }
            out.push_back(std::move(r));
        } catch (const Error& e) {
            fail(e.code(), "scenario '" + name + "': " + e.what());
        } catch (const json::exception& e) {
            fail(Errc::Parse, "scenario '" + name + "': " + e.what());
        }
    }
    return out;
}

std::vector<WhatIfResult> WhatIfRunner::run_file(const std::filesystem::path& path) const {
    std::ifstream in(path);
    if (!in) fail(Errc::Parse, "cannot open scenario file: " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) fail(Errc::Parse, "scenario file is not valid JSON: " + path.string());
    return run(doc);
}

} // namespace dkg
