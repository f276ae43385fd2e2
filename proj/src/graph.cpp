#include "dkg/graph.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "dkg/error.hpp"

namespace dkg {

namespace {

std::string squash(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '_' || c == '-' || c == ' ') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

constexpr std::array<std::string_view, 9> kRelations = {
    relation::has_visit,  relation::diagnosed_with, relation::underwent,
    relation::prescribed, relation::mentioned,      relation::synonym_of,
    relation::is_a,       relation::interacts_with, relation::treats,
};

} // namespace

std::string_view to_string(EntityType t) {
    switch (t) {
        case EntityType::Subject: return "Subject";
        case EntityType::Visit: return "Visit";
        case EntityType::Disease: return "Disease";
        case EntityType::Procedure: return "Procedure";
        case EntityType::Medication: return "Medication";
        case EntityType::Concept: return "Concept";
    }
    return "Concept";
}

EntityType parse_entity_type(std::string_view s) {
    const auto k = squash(s);
    if (k == "subject" || k == "patient") return EntityType::Subject;
    if (k == "visit") return EntityType::Visit;
    if (k == "disease" || k == "diagnosis") return EntityType::Disease;
    if (k == "procedure") return EntityType::Procedure;
    if (k == "medication" || k == "drug") return EntityType::Medication;
    if (k == "concept") return EntityType::Concept;
    fail(Errc::Validation, "unknown entity type: " + std::string(s));
}

std::string_view color_role(EntityType t) {
    switch (t) {
        case EntityType::Subject: return "red";
        case EntityType::Visit: return "white";
        case EntityType::Disease: return "brown";
        case EntityType::Procedure: return "green";
        case EntityType::Medication: return "pink";
        case EntityType::Concept: return "gray";
    }
    return "gray";
}

std::string_view to_string(SourceKind k) {
    switch (k) {
        case SourceKind::Structured: return "Structured";
        case SourceKind::FreeText: return "FreeText";
        case SourceKind::Static: return "Static";
    }
    return "Structured";
}

SourceKind parse_source_kind(std::string_view s) {
    const auto k = squash(s);
    if (k == "structured") return SourceKind::Structured;
    if (k == "freetext") return SourceKind::FreeText;
    if (k == "static") return SourceKind::Static;
    fail(Errc::Validation, "unknown source kind: " + std::string(s));
}

std::string_view to_string(VariantKind k) {
    switch (k) {
        case VariantKind::Latest: return "latest";
        case VariantKind::Historical: return "historical";
        case VariantKind::Enriched: return "enriched";
        case VariantKind::ConfidenceAware: return "confidence_aware";
        case VariantKind::Filtered: return "filtered";
    }
    return "latest";
}

VariantKind parse_variant_kind(std::string_view s) {
    const auto k = squash(s);
    if (k == "latest") return VariantKind::Latest;
    if (k == "historical") return VariantKind::Historical;
    if (k == "enriched") return VariantKind::Enriched;
    if (k == "confidenceaware") return VariantKind::ConfidenceAware;
    if (k == "filtered") return VariantKind::Filtered;
    fail(Errc::BadRequest, "unknown variant: " + std::string(s));
}

bool is_known_relation(std::string_view r) {
    return std::find(kRelations.begin(), kRelations.end(), r) != kRelations.end();
}

bool is_static_relation(std::string_view r) {
    return r == relation::synonym_of || r == relation::is_a || r == relation::interacts_with ||
           r == relation::treats;
}

std::string TripleKey::str() const { return head + "|" + relation + "|" + tail; }

TripleKey TripleKey::parse(std::string_view s) {
    const auto a = s.find('|');
    const auto b = a == std::string_view::npos ? a : s.find('|', a + 1);
    if (b == std::string_view::npos || s.find('|', b + 1) != std::string_view::npos) {
        fail(Errc::BadRequest, "malformed edge key: " + std::string(s));
    }
    return {std::string(s.substr(0, a)), std::string(s.substr(a + 1, b - a - 1)),
            std::string(s.substr(b + 1))};
}

void union_evidence(std::vector<std::string>& evidence, const std::vector<std::string>& more) {
    for (const auto& id : more) {
        if (std::find(evidence.begin(), evidence.end(), id) == evidence.end()) {
            evidence.push_back(id);
        }
    }
}

std::set<TripleKey> GraphVariant::keys() const {
    std::set<TripleKey> out;
    if (score_bearing()) {
        for (const auto& [k, _] : scored) out.insert(k);
    } else {
        for (const auto& [k, _] : triples) out.insert(k);
    }
    return out;
}

std::vector<const Triple*> GraphVariant::edges() const {
    std::vector<const Triple*> out;
    if (score_bearing()) {
        out.reserve(scored.size());
        for (const auto& [_, s] : scored) out.push_back(&s.triple);
    } else {
        out.reserve(triples.size());
        for (const auto& [_, t] : triples) out.push_back(&t);
    }
    return out;
}

const Triple* GraphVariant::find(const TripleKey& key) const {
    if (score_bearing()) {
        auto it = scored.find(key);
        return it == scored.end() ? nullptr : &it->second.triple;
    }
    auto it = triples.find(key);
    return it == triples.end() ? nullptr : &it->second;
}

std::set<std::string> GraphVariant::endpoint_ids() const {
    std::set<std::string> out;
    for (const auto* t : edges()) {
        out.insert(t->head);
        out.insert(t->tail);
    }
    return out;
}

EntityTable entities_for(const GraphVariant& variant, const EntityTable& table) {
    EntityTable out;
    auto ids = variant.endpoint_ids();
    ids.insert(variant.subject_id);
    for (const auto& id : ids) {
        if (auto it = table.find(id); it != table.end()) out.emplace(id, it->second);
    }
    return out;
}

void to_json(json& j, const TripleKey& k) { j = k.str(); }

void to_json(json& j, const Triple& t) {
    j = json{{"head", t.head},
             {"relation", t.relation},
             {"tail", t.tail},
             {"first_seen", t.first_seen},
             {"evidence", t.evidence}};
}

void from_json(const json& j, Triple& t) {
    t.head = j.at("head").get<std::string>();
    t.relation = j.at("relation").get<std::string>();
    t.tail = j.at("tail").get<std::string>();
    t.first_seen = j.value("first_seen", 0);
    t.evidence = j.value("evidence", std::vector<std::string>{});
}

void to_json(json& j, const ScoredTriple& t) {
    j = t.triple;
    j["confidence"] = t.confidence;
    j["rationale"] = t.rationale;
    j["supporting"] = t.supporting;
    j["conflicting"] = t.conflicting;
}

void from_json(const json& j, ScoredTriple& t) {
    t.triple = j.get<Triple>();
    t.confidence = j.at("confidence").get<double>();
    t.rationale = j.value("rationale", "");
    t.supporting.clear();
    t.conflicting.clear();
    for (const auto& k : j.value("supporting", json::array())) {
        t.supporting.push_back(TripleKey::parse(k.get<std::string>()));
    }
    for (const auto& k : j.value("conflicting", json::array())) {
        t.conflicting.push_back(TripleKey::parse(k.get<std::string>()));
    }
}

void to_json(json& j, const Entity& e) {
    j = json{{"concept_id", e.concept_id},
             {"label", e.label},
             {"surface_forms", e.surface_forms},
             {"entity_type", to_string(e.entity_type)}};
    if (e.source_vocabulary) j["vocab"] = *e.source_vocabulary;
}

void from_json(const json& j, Entity& e) {
    e.concept_id = j.at("concept_id").get<std::string>();
    e.label = j.value("label", e.concept_id);
    e.surface_forms = j.value("surface_forms", std::set<std::string>{});
    e.entity_type = parse_entity_type(j.at("entity_type").get<std::string>());
    if (j.contains("vocab")) {
        e.source_vocabulary = j.at("vocab").get<std::string>();
    } else {
        e.source_vocabulary.reset();
    }
}

} // namespace dkg
