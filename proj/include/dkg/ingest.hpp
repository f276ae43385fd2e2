#pragma once
// Record parsing, mention canonicalization and visit-graph extraction.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dkg/graph.hpp"

namespace dkg {

struct SubjectRecord {
    std::string record_id;
    std::string subject_id;
    int visit_index = 0;
    std::string timestamp;  // metadata only, never used for ordering
    SourceKind source_kind = SourceKind::Structured;
    std::vector<std::string> diagnoses;
    std::vector<std::string> procedures;
    std::vector<std::string> medications;
    std::optional<std::string> note_text;

    friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

// Throws Errc::Validation on empty ids, negative visit index, a Static
// source kind, or a Structured record that carries only free text.
void validate(const SubjectRecord& record);

void to_json(json& j, const SubjectRecord& r);
void from_json(const json& j, SubjectRecord& r);

std::vector<SubjectRecord> read_records_jsonl(const std::filesystem::path& path);
void write_records_jsonl(const std::filesystem::path& path, const std::vector<SubjectRecord>& records);

// Lowercase, trim, collapse internal whitespace.
std::string normalize_mention(std::string_view mention);

// Normalized tokens with leading/trailing punctuation stripped.
std::vector<std::string> tokenize_text(std::string_view text);

struct ConceptEntry {
    std::string concept_id;
    EntityType entity_type = EntityType::Concept;
    std::string vocab;
};

class ConceptDictionary {
public:
    ConceptDictionary() = default;

    // {"surface form": {"concept_id": ..., "entity_type": ..., "vocab": ...}}.
    // The first surface form listed for a concept becomes its label.
    static ConceptDictionary load(const std::filesystem::path& path);
    static ConceptDictionary from_json(const nlohmann::ordered_json& j);

    // Throws Errc::Validation if the normalized form already maps elsewhere.
    void add(std::string_view surface_form, const ConceptEntry& entry);

    const ConceptEntry* lookup(std::string_view mention) const;
    bool has_concept(const std::string& concept_id) const { return concepts_.contains(concept_id); }
    Entity entity(const std::string& concept_id) const;
    std::string label(const std::string& concept_id) const;

    const std::map<std::string, ConceptEntry>& entries() const { return entries_; }
    std::size_t concept_count() const { return concepts_.size(); }

private:
    struct ConceptInfo {
        std::string label;
        std::set<std::string> forms;
        EntityType entity_type;
        std::string vocab;
    };
    std::map<std::string, ConceptEntry> entries_;  // normalized form -> concept
    std::map<std::string, ConceptInfo> concepts_;
};

struct ConceptRef {
    std::string concept_id;
    EntityType entity_type;

    friend bool operator==(const ConceptRef&, const ConceptRef&) = default;
};

struct Unmapped {
    std::string normalized;

    friend bool operator==(const Unmapped&, const Unmapped&) = default;
};

using Canonical = std::variant<ConceptRef, Unmapped>;

Canonical canonicalize(std::string_view mention, const ConceptDictionary& dict);

// Finds concept mentions inside free text.
class MentionExtractor {
public:
    virtual ~MentionExtractor() = default;
    virtual std::vector<ConceptRef> extract(std::string_view text, const ConceptDictionary& dict) const = 0;
};

// Matches dictionary surface forms on token boundaries, longest form first.
// Results are unique and ordered by first occurrence.
class GazetteerExtractor final : public MentionExtractor {
public:
    std::vector<ConceptRef> extract(std::string_view text, const ConceptDictionary& dict) const override;
};

std::string subject_node_id(const std::string& subject_id);
std::string visit_node_id(const std::string& subject_id, int visit_index);

struct Extraction {
    std::vector<Triple> triples;  // unique by key, sorted by key
    std::vector<Unmapped> unmapped;
    EntityTable entities;  // every endpoint of `triples`
};

Extraction extract_triples(const SubjectRecord& record, const ConceptDictionary& dict,
                           const MentionExtractor& extractor = GazetteerExtractor{});

} // namespace dkg
