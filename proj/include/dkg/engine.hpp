#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dkg/confidence.hpp"
#include "dkg/enrich.hpp"
#include "dkg/ingest.hpp"
#include "dkg/store.hpp"

namespace dkg {

struct IngestReport {
    std::string subject_id;
    std::string record_id;
    std::int64_t version = 0;
    std::size_t n_triples = 0;  // triples extracted into Latest
    std::size_t n_unmapped = 0;
    std::vector<std::string> unmapped;
};

void to_json(json& j, const IngestReport& r);

// Runs extraction, Latest, Historical, enrichment and scoring as one commit.
class Engine {
public:
    Engine(std::shared_ptr<const ConceptDictionary> dictionary, std::shared_ptr<const StaticKg> static_kg,
           std::shared_ptr<const TripleScorer> scorer, std::shared_ptr<KgStore> store,
           std::shared_ptr<const MentionExtractor> extractor = std::make_shared<GazetteerExtractor>(),
           unsigned scoring_threads = 1);

    // Errc::Conflict for a duplicate record id, Errc::Validation for an
    // invalid record or a visit_index that does not increase. Nothing becomes
    // visible unless every stage succeeds.
    IngestReport ingest_record(const SubjectRecord& record);

    std::vector<IngestReport> ingest_all(const std::vector<SubjectRecord>& records);

    const KgStore& store() const { return *store_; }
    std::shared_ptr<KgStore> store_ptr() const { return store_; }
    const ConceptDictionary& dictionary() const { return *dictionary_; }
    std::shared_ptr<const ConceptDictionary> dictionary_ptr() const { return dictionary_; }
    const StaticKg& static_kg() const { return *static_kg_; }
    const TripleScorer& scorer() const { return *scorer_; }

private:
    std::shared_ptr<const ConceptDictionary> dictionary_;
    std::shared_ptr<const StaticKg> static_kg_;
    std::shared_ptr<const TripleScorer> scorer_;
    std::shared_ptr<KgStore> store_;
    std::shared_ptr<const MentionExtractor> extractor_;
    unsigned scoring_threads_;
};

} // namespace dkg
