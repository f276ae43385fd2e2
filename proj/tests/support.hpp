#pragma once
// Fixtures shared by the test binaries.

#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "dkg/config.hpp"
#include "dkg/engine.hpp"
#include "dkg/error.hpp"
#include "dkg/qa.hpp"

namespace dkg::test {

inline std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(DKG_DATA_ROOT) / rel; }

// Small dictionary used by the unit examples.
inline std::shared_ptr<const ConceptDictionary> fixture_dict() {
    static const auto dict = std::make_shared<const ConceptDictionary>(ConceptDictionary::from_json(
        nlohmann::ordered_json::parse(R"({
        "aspirin": {"concept_id": "C_ASP", "entity_type": "Medication", "vocab": "ATC"},
        "asa": {"concept_id": "C_ASP", "entity_type": "Medication", "vocab": "ATC"},
        "warfarin": {"concept_id": "C_WARF", "entity_type": "Medication", "vocab": "ATC"},
        "metoprolol": {"concept_id": "C_METO", "entity_type": "Medication", "vocab": "ATC"},
        "hypertension": {"concept_id": "C_HTN", "entity_type": "Disease", "vocab": "ICD"},
        "high blood pressure": {"concept_id": "C_HTN", "entity_type": "Disease", "vocab": "ICD"},
        "atrial fibrillation": {"concept_id": "C_AF", "entity_type": "Disease", "vocab": "ICD"},
        "sepsis": {"concept_id": "C_SEPSIS", "entity_type": "Disease", "vocab": "ICD"},
        "echocardiogram": {"concept_id": "C_ECHO", "entity_type": "Procedure", "vocab": "ICD"},
        "anticoagulant": {"concept_id": "C_ANTICOAG", "entity_type": "Concept", "vocab": "ATC"}
    })")));
    return dict;
}

inline std::shared_ptr<const StaticKg> fixture_kg() {
    static const auto kg = std::make_shared<const StaticKg>(StaticKg::from_edges(
        {{"C_ASP", "interacts_with", "C_WARF"},
         {"C_WARF", "is_a", "C_ANTICOAG"},
         {"C_METO", "treats", "C_HTN"},
         {"C_WARF", "treats", "C_AF"}},
        "fixture"));
    return kg;
}

inline std::shared_ptr<const ConceptDictionary> bundled_dict() {
    static const auto dict =
        std::make_shared<const ConceptDictionary>(ConceptDictionary::load(data_path("dictionary.json")));
    return dict;
}

inline std::shared_ptr<const StaticKg> bundled_kg() {
    static const auto kg = std::make_shared<const StaticKg>(StaticKg::load(data_path("static_kg.jsonl")));
    return kg;
}

inline SubjectRecord record(const std::string& subject, int visit, std::vector<std::string> dx = {},
                            std::vector<std::string> px = {}, std::vector<std::string> rx = {},
                            std::optional<std::string> note = std::nullopt,
                            SourceKind kind = SourceKind::Structured) {
    SubjectRecord r;
    r.subject_id = subject;
    r.record_id = subject + "-r" + std::to_string(visit);
    r.visit_index = visit;
    r.timestamp = "2022-01-01T00:00:00Z";
    r.source_kind = kind;
    r.diagnoses = std::move(dx);
    r.procedures = std::move(px);
    r.medications = std::move(rx);
    r.note_text = std::move(note);
    return r;
}

struct Pipeline {
    std::shared_ptr<KgStore> store = std::make_shared<KgStore>();
    std::shared_ptr<const ConceptDictionary> dict;
    std::shared_ptr<const StaticKg> kg;
    std::shared_ptr<const TripleScorer> scorer;
    std::unique_ptr<Engine> engine;

    explicit Pipeline(std::shared_ptr<const ConceptDictionary> d = fixture_dict(),
                      std::shared_ptr<const StaticKg> k = fixture_kg(),
                      std::shared_ptr<const TripleScorer> s = std::make_shared<HeuristicScorer>(),
                      std::shared_ptr<KgStore> st = nullptr)
        : dict(std::move(d)), kg(std::move(k)), scorer(std::move(s)) {
        if (st) store = std::move(st);
        engine = std::make_unique<Engine>(dict, kg, scorer, store);
    }
};

// In-process chat client: replays scripted replies, "!throw" raises Upstream.
class ScriptedChat final : public ChatClient {
public:
    explicit ScriptedChat(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}

    std::string complete(const ChatRequest& request) override {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
        if (replies_.empty()) fail(Errc::Upstream, "script exhausted");
        auto r = replies_.front();
        if (replies_.size() > 1) replies_.pop_front();
        if (r == "!throw") fail(Errc::Upstream, "scripted outage");
        return r;
    }
    std::string model() const override { return "scripted"; }
    std::size_t calls() const {
        std::lock_guard lock(mu_);
        return requests_.size();
    }

private:
    mutable std::mutex mu_;
    std::deque<std::string> replies_;
    std::vector<ChatRequest> requests_;
};

inline std::set<TripleKey> key_set(const GraphVariant& g) { return g.keys(); }

inline bool subset(const std::set<TripleKey>& a, const std::set<TripleKey>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

} // namespace dkg::test
