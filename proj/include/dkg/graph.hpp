#pragma once
// Core graph vocabulary shared by every stage: entities, triples, scored
// triples and the five materialized graph variants.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dkg {

using json = nlohmann::json;

enum class EntityType { Subject, Visit, Disease, Procedure, Medication, Concept };

std::string_view to_string(EntityType t);
EntityType parse_entity_type(std::string_view s);

// Fixed display mapping used by graph exports.
std::string_view color_role(EntityType t);

enum class SourceKind { Structured, FreeText, Static };

std::string_view to_string(SourceKind k);
SourceKind parse_source_kind(std::string_view s);

enum class VariantKind { Latest, Historical, Enriched, ConfidenceAware, Filtered };

std::string_view to_string(VariantKind k);
// Accepts "confidence_aware", "confidence-aware" and "ConfidenceAware" style spellings.
VariantKind parse_variant_kind(std::string_view s);

namespace relation {
inline constexpr std::string_view has_visit = "has_visit";
inline constexpr std::string_view diagnosed_with = "diagnosed_with";
inline constexpr std::string_view underwent = "underwent";
inline constexpr std::string_view prescribed = "prescribed";
inline constexpr std::string_view mentioned = "mentioned";
inline constexpr std::string_view synonym_of = "synonym_of";
inline constexpr std::string_view is_a = "is_a";
inline constexpr std::string_view interacts_with = "interacts_with";
inline constexpr std::string_view treats = "treats";
} // namespace relation

bool is_known_relation(std::string_view r);
bool is_static_relation(std::string_view r);

struct Entity {
    std::string concept_id;
    std::string label;  // preferred surface form
    std::set<std::string> surface_forms;
    EntityType entity_type = EntityType::Concept;
    std::optional<std::string> source_vocabulary;

    friend bool operator==(const Entity&, const Entity&) = default;
};

struct TripleKey {
    std::string head;
    std::string relation;
    std::string tail;

    // "head|relation|tail"
    std::string str() const;
    static TripleKey parse(std::string_view s);

    friend auto operator<=>(const TripleKey&, const TripleKey&) = default;
};

struct Triple {
    std::string head;
    std::string relation;
    std::string tail;
    int first_seen = 0;
    std::vector<std::string> evidence;  // record ids or "static:<source>"

    TripleKey key() const { return {head, relation, tail}; }

    friend bool operator==(const Triple&, const Triple&) = default;
};

// Appends ids from `more` that are not already present, preserving order.
void union_evidence(std::vector<std::string>& evidence, const std::vector<std::string>& more);

struct ScoredTriple {
    Triple triple;
    double confidence = 0.0;
    std::string rationale;
    std::vector<TripleKey> supporting;
    std::vector<TripleKey> conflicting;

    friend bool operator==(const ScoredTriple&, const ScoredTriple&) = default;
};

using EntityTable = std::map<std::string, Entity>;

// A materialized snapshot of one subject's graph. Latest, Historical and
// Enriched populate `triples`; ConfidenceAware and Filtered populate `scored`.
struct GraphVariant {
    VariantKind kind = VariantKind::Latest;
    std::string subject_id;
    std::int64_t version = 0;
    std::optional<double> tau;  // Filtered only
    std::map<TripleKey, Triple> triples;
    std::map<TripleKey, ScoredTriple> scored;
    EntityTable entities;

    bool score_bearing() const {
        return kind == VariantKind::ConfidenceAware || kind == VariantKind::Filtered;
    }
    std::size_t size() const { return score_bearing() ? scored.size() : triples.size(); }
    std::set<TripleKey> keys() const;
    // Unscored view of every edge, whatever the kind.
    std::vector<const Triple*> edges() const;
    const Triple* find(const TripleKey& key) const;
    // Entity ids that occur as an endpoint of some edge.
    std::set<std::string> endpoint_ids() const;

    friend bool operator==(const GraphVariant&, const GraphVariant&) = default;
};

// Restricts `table` to the endpoints of `variant` plus its subject node.
EntityTable entities_for(const GraphVariant& variant, const EntityTable& table);

void to_json(json& j, const TripleKey& k);
void to_json(json& j, const Triple& t);
void from_json(const json& j, Triple& t);
void to_json(json& j, const ScoredTriple& t);
void from_json(const json& j, ScoredTriple& t);
void to_json(json& j, const Entity& e);
void from_json(const json& j, Entity& e);

} // namespace dkg
