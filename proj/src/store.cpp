#include "dkg/store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "dkg/confidence.hpp"
#include "dkg/error.hpp"

namespace dkg {

namespace {

bool is_visit(const EntityTable& entities, const std::string& id) {
    auto it = entities.find(id);
    return it != entities.end() && it->second.entity_type == EntityType::Visit;
}

std::string log_file_name(const std::string& subject_id) {
    std::ostringstream out;
    for (unsigned char c : subject_id) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
            out << c;
        } else {
            static const char* hex = "0123456789ABCDEF";
            out << '%' << hex[c >> 4] << hex[c & 15];
        }
    }
    out << ".jsonl";
    return out.str();
}

} // namespace

GraphVariant instantiate_latest(const std::string& subject_id, const std::vector<Triple>& triples,
                                const EntityTable& known_entities, std::int64_t previous_version) {
    if (!known_entities.contains(subject_id)) {
        fail(Errc::Validation, "subject node missing: " + subject_id);
    }
    GraphVariant latest;
    latest.kind = VariantKind::Latest;
    latest.subject_id = subject_id;
    latest.version = previous_version + 1;
    for (const auto& t : triples) {
        for (const auto* id : {&t.head, &t.tail}) {
            if (id->empty() || !known_entities.contains(*id)) {
                fail(Errc::Validation, "non-canonical entity reference: '" + *id + "'");
            }
        }
        if (!is_known_relation(t.relation)) fail(Errc::Validation, "unknown relation: " + t.relation);
        auto [it, inserted] = latest.triples.try_emplace(t.key(), t);
        if (!inserted) {
            union_evidence(it->second.evidence, t.evidence);
            it->second.first_seen = std::min(it->second.first_seen, t.first_seen);
        }
    }
    latest.entities = entities_for(latest, known_entities);
    return latest;
}

GraphVariant merge_into_historical(const GraphVariant& latest, const GraphVariant& historical) {
    if (latest.kind != VariantKind::Latest || historical.kind != VariantKind::Historical) {
        fail(Errc::Validation, "merge expects (Latest, Historical)");
    }
    if (historical.version != 0 && latest.subject_id != historical.subject_id) {
        fail(Errc::Validation, "subject mismatch: " + latest.subject_id + " vs " + historical.subject_id);
    }
    if (historical.version == latest.version) return historical;
    if (historical.version > latest.version) {
        fail(Errc::Validation, "version regression: historical v" + std::to_string(historical.version) +
                                   " is ahead of latest v" + std::to_string(latest.version));
    }
    if (historical.version + 1 != latest.version) {
        fail(Errc::Validation, "version gap: historical v" + std::to_string(historical.version) +
                                   " cannot absorb latest v" + std::to_string(latest.version));
    }

    GraphVariant merged = historical;
    merged.subject_id = latest.subject_id;
    merged.version = latest.version;
    for (const auto& [id, e] : latest.entities) merged.entities.try_emplace(id, e);

    // Earlier visit-level observations, chronological, keyed by (relation, tail).
    std::map<std::pair<std::string, std::string>, std::vector<const Triple*>> observed;
    for (const auto& [_, t] : historical.triples) {
        if (is_visit(historical.entities, t.head)) observed[{t.relation, t.tail}].push_back(&t);
    }
    for (auto& [_, list] : observed) {
        std::stable_sort(list.begin(), list.end(),
                         [](const Triple* a, const Triple* b) { return a->first_seen < b->first_seen; });
    }

    for (const auto& [key, t] : latest.triples) {
        if (auto it = merged.triples.find(key); it != merged.triples.end()) {
            union_evidence(it->second.evidence, t.evidence);
            it->second.first_seen = std::min(it->second.first_seen, t.first_seen);
            continue;
        }
        Triple added = t;
        if (is_visit(merged.entities, t.head) && t.relation != relation::has_visit) {
            if (auto it = observed.find({t.relation, t.tail}); it != observed.end()) {
                std::vector<std::string> evidence;
                for (const auto* prior : it->second) union_evidence(evidence, prior->evidence);
                union_evidence(evidence, t.evidence);
                added.evidence = std::move(evidence);
            }
        }
        merged.triples.emplace(key, std::move(added));
    }
    return merged;
}

KgStore::KgStore(std::filesystem::path log_dir) : log_dir_(std::move(log_dir)) {
    std::filesystem::create_directories(*log_dir_);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(*log_dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) replay(f);
}

KgStore::Slot& KgStore::slot_for(const std::string& subject_id) {
    {
        std::shared_lock lock(slots_mu_);
        if (auto it = slots_.find(subject_id); it != slots_.end()) return *it->second;
    }
    std::unique_lock lock(slots_mu_);
    auto& slot = slots_[subject_id];
    if (!slot) slot = std::make_unique<Slot>();
    return *slot;
}

std::shared_ptr<const SubjectSnapshot> KgStore::find(const std::string& subject_id) const {
    std::shared_lock lock(slots_mu_);
    auto it = slots_.find(subject_id);
    if (it == slots_.end()) return nullptr;
    std::lock_guard read(it->second->read_mu);
    return it->second->current;
}

std::shared_ptr<const SubjectSnapshot> KgStore::snapshot(const std::string& subject_id) const {
    auto snap = find(subject_id);
    if (!snap) fail(Errc::NotFound, "unknown subject: " + subject_id);
    return snap;
}

std::shared_ptr<const GraphVariant> KgStore::get_variant(const std::string& subject_id, VariantKind kind,
                                                         std::optional<double> tau) const {
    if (tau.has_value() != (kind == VariantKind::Filtered)) {
        fail(Errc::BadRequest, kind == VariantKind::Filtered ? "filtered variant requires tau"
                                                             : "tau is only valid for the filtered variant");
    }
    auto snap = snapshot(subject_id);
    switch (kind) {
        case VariantKind::Latest: return snap->latest;
        case VariantKind::Historical: return snap->historical;
        case VariantKind::Enriched: return snap->enriched;
        case VariantKind::ConfidenceAware:
        case VariantKind::Filtered:
            break;
    }
    if (!snap->confidence) fail(Errc::Conflict, "confidence not yet computed");
    if (kind == VariantKind::ConfidenceAware) return snap->confidence;
    return std::make_shared<const GraphVariant>(filter_by_confidence(*snap->confidence, FilterThreshold(*tau)));
}

std::vector<SubjectSummary> KgStore::list_subjects() const {
    std::vector<SubjectSummary> out;
    std::shared_lock lock(slots_mu_);
    for (const auto& [id, slot] : slots_) {
        std::lock_guard read(slot->read_mu);
        if (slot->current) out.push_back({id, static_cast<int>(slot->current->records.size())});
    }
    return out;
}

bool KgStore::has_record(const std::string& record_id) const {
    std::lock_guard lock(records_mu_);
    return record_ids_.contains(record_id);
}

std::shared_ptr<const SubjectSnapshot> KgStore::commit(const std::string& subject_id, const std::string& record_id,
                                                       const Builder& build) {
    {
        std::lock_guard lock(records_mu_);
        if (!record_ids_.insert(record_id).second) {
            fail(Errc::Conflict, "duplicate record_id: " + record_id);
        }
    }
    try {
        auto& slot = slot_for(subject_id);
        std::lock_guard write(slot.write_mu);
        std::shared_ptr<const SubjectSnapshot> previous;
        {
            std::lock_guard read(slot.read_mu);
            previous = slot.current;
        }
        auto next = std::make_shared<const SubjectSnapshot>(build(previous.get()));
        if (next->subject_id != subject_id || next->version != (previous ? previous->version : 0) + 1) {
            fail(Errc::Validation, "builder produced an inconsistent snapshot for " + subject_id);
        }
        if (log_dir_) append_log(*next);
        std::lock_guard read(slot.read_mu);
        slot.current = std::move(next);
        return slot.current;
    } catch (...) {
        std::lock_guard lock(records_mu_);
        record_ids_.erase(record_id);
        throw;
    }
}

json commit_log_entry(const SubjectSnapshot& snap) {
    const auto& meta = snap.records.at(snap.last_record_id);
    json entities = json::array();
    for (const auto& [_, e] : snap.latest->entities) entities.push_back(e);
    json triples = json::array();
    for (const auto& [_, t] : snap.latest->triples) triples.push_back(t);
    json scores = json::array();
    if (snap.confidence) {
        for (const auto& [_, s] : snap.confidence->scored) scores.push_back(s);
    }
    return json{{"version", snap.version},
                {"record_id", meta.record_id},
                {"subject_id", snap.subject_id},
                {"visit_index", meta.visit_index},
                {"source_kind", to_string(meta.source_kind)},
                {"timestamp", meta.timestamp},
                {"entities", entities},
                {"triples", triples},
                {"scores", scores}};
}

void KgStore::append_log(const SubjectSnapshot& snap) const {
    const auto path = *log_dir_ / log_file_name(snap.subject_id);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << commit_log_entry(snap).dump() << '\n';
    out.flush();
    if (!out) fail(Errc::Parse, "failed to append commit log: " + path.string());
}

void KgStore::replay(const std::filesystem::path& file) {
    std::ifstream in(file);
    std::string line;
    std::shared_ptr<const SubjectSnapshot> current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            SubjectSnapshot snap = current ? *current : SubjectSnapshot{};
            snap.subject_id = j.at("subject_id").get<std::string>();
            RecordMeta meta{j.at("record_id").get<std::string>(), j.at("visit_index").get<int>(),
                            parse_source_kind(j.at("source_kind").get<std::string>()),
                            j.value("timestamp", "")};
            for (const auto& e : j.at("entities")) {
                auto ent = e.get<Entity>();
                snap.entities.try_emplace(ent.concept_id, ent);
            }
            std::vector<Triple> triples;
            for (const auto& t : j.at("triples")) triples.push_back(t.get<Triple>());

            auto latest = instantiate_latest(snap.subject_id, triples, snap.entities, snap.version);
            if (latest.version != j.at("version").get<std::int64_t>()) {
                fail(Errc::Parse, "non-consecutive version");
            }
            GraphVariant empty_hist;
            empty_hist.kind = VariantKind::Historical;
            empty_hist.subject_id = snap.subject_id;
            auto historical = merge_into_historical(latest, snap.historical ? *snap.historical : empty_hist);
            historical.entities = entities_for(historical, snap.entities);

            GraphVariant enriched;
            enriched.kind = VariantKind::Enriched;
            enriched.subject_id = snap.subject_id;
            enriched.version = latest.version;
            GraphVariant confidence = enriched;
            confidence.kind = VariantKind::ConfidenceAware;
            for (const auto& s : j.at("scores")) {
                auto st = s.get<ScoredTriple>();
                enriched.triples.emplace(st.triple.key(), st.triple);
                confidence.scored.emplace(st.triple.key(), std::move(st));
            }
            enriched.entities = entities_for(enriched, snap.entities);
            confidence.entities = enriched.entities;

            snap.version = latest.version;
            snap.last_visit = meta.visit_index;
            snap.last_record_id = meta.record_id;
            snap.records[meta.record_id] = meta;
            snap.latest = std::make_shared<const GraphVariant>(std::move(latest));
            snap.historical = std::make_shared<const GraphVariant>(std::move(historical));
            snap.enriched = std::make_shared<const GraphVariant>(std::move(enriched));
            snap.confidence = std::make_shared<const GraphVariant>(std::move(confidence));
            {
                std::lock_guard lock(records_mu_);
                record_ids_.insert(meta.record_id);
            }
            current = std::make_shared<const SubjectSnapshot>(std::move(snap));
        } catch (const std::exception& e) {
            fail(Errc::Parse, file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (current) {
        auto& slot = slot_for(current->subject_id);
        std::lock_guard read(slot.read_mu);
        slot.current = std::move(current);
    }
}

} // namespace dkg
