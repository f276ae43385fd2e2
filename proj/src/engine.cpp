#include "dkg/engine.hpp"

#include "dkg/error.hpp"

namespace dkg {

void to_json(json& j, const IngestReport& r) {
    j = json{{"subject_id", r.subject_id},
             {"record_id", r.record_id},
             {"version", r.version},
             {"n_triples", r.n_triples},
             {"n_unmapped", r.n_unmapped},
             {"unmapped", r.unmapped}};
}

Engine::Engine(std::shared_ptr<const ConceptDictionary> dictionary, std::shared_ptr<const StaticKg> static_kg,
               std::shared_ptr<const TripleScorer> scorer, std::shared_ptr<KgStore> store,
               std::shared_ptr<const MentionExtractor> extractor, unsigned scoring_threads)
    : dictionary_(std::move(dictionary)),
      static_kg_(std::move(static_kg)),
      scorer_(std::move(scorer)),
      store_(std::move(store)),
      extractor_(std::move(extractor)),
      scoring_threads_(scoring_threads) {
    if (!dictionary_ || !static_kg_ || !scorer_ || !store_ || !extractor_) {
        fail(Errc::Validation, "engine requires dictionary, static KG, scorer, store and extractor");
    }
}

IngestReport Engine::ingest_record(const SubjectRecord& record) {
    validate(record);
    IngestReport report;
    report.subject_id = record.subject_id;
    report.record_id = record.record_id;

    auto build = [&](const SubjectSnapshot* prev) {
        if (prev && record.visit_index <= prev->last_visit) {
            fail(Errc::Validation, "visit_index " + std::to_string(record.visit_index) + " for subject " +
                                       record.subject_id + " does not follow visit " +
                                       std::to_string(prev->last_visit));
        }
        SubjectSnapshot next = prev ? *prev : SubjectSnapshot{};
        next.subject_id = record.subject_id;

        auto extraction = extract_triples(record, *dictionary_, *extractor_);
        for (auto& [id, e] : extraction.entities) next.entities.try_emplace(id, e);

        auto latest = instantiate_latest(record.subject_id, extraction.triples, next.entities, next.version);

        GraphVariant empty_hist;
        empty_hist.kind = VariantKind::Historical;
        empty_hist.subject_id = record.subject_id;
        auto historical = merge_into_historical(latest, prev ? *prev->historical : empty_hist);
        historical.entities = entities_for(historical, next.entities);

        auto enriched = enrich(historical, *static_kg_);
        enriched.entities = entities_for(enriched, next.entities);

        next.records[record.record_id] = RecordMeta{record.record_id, record.visit_index, record.source_kind,
                                                    record.timestamp};
        SourceIndex sources;
        for (const auto& [id, meta] : next.records) sources.add(id, meta.source_kind, meta.visit_index);
        auto confidence = materialize_confidence(enriched, *scorer_, ScoringEnv{record.visit_index, &sources},
                                                 scoring_threads_);

        report.version = latest.version;
        report.n_triples = latest.triples.size();
        for (const auto& u : extraction.unmapped) report.unmapped.push_back(u.normalized);
        report.n_unmapped = report.unmapped.size();

        next.version = latest.version;
        next.last_visit = record.visit_index;
        next.last_record_id = record.record_id;
        next.latest = std::make_shared<const GraphVariant>(std::move(latest));
        next.historical = std::make_shared<const GraphVariant>(std::move(historical));
        next.enriched = std::make_shared<const GraphVariant>(std::move(enriched));
        next.confidence = std::make_shared<const GraphVariant>(std::move(confidence));
        return next;
    };

    store_->commit(record.subject_id, record.record_id, build);
    return report;
}

std::vector<IngestReport> Engine::ingest_all(const std::vector<SubjectRecord>& records) {
    std::vector<IngestReport> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(ingest_record(r));
    return out;
}

} // namespace dkg
