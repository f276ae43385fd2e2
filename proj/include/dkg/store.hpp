#pragma once
// Versioned per-subject store of materialized graph variants.
//
// Every subject owns a chain of immutable SubjectSnapshot values. A commit
// builds the next snapshot off to the side, appends it to the subject's log
// (when persistence is enabled) and only then publishes it, so readers never
// observe a partially materialized version.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "dkg/graph.hpp"

namespace dkg {

struct RecordMeta {
    std::string record_id;
    int visit_index = 0;
    SourceKind source_kind = SourceKind::Structured;
    std::string timestamp;

    friend bool operator==(const RecordMeta&, const RecordMeta&) = default;
};

struct SubjectSnapshot {
    std::string subject_id;
    std::int64_t version = 0;
    int last_visit = -1;
    std::string last_record_id;
    std::map<std::string, RecordMeta> records;
    EntityTable entities;
    std::shared_ptr<const GraphVariant> latest;
    std::shared_ptr<const GraphVariant> historical;
    std::shared_ptr<const GraphVariant> enriched;
    std::shared_ptr<const GraphVariant> confidence;  // null until scored
};

struct SubjectSummary {
    std::string subject_id;
    int visits = 0;

    friend bool operator==(const SubjectSummary&, const SubjectSummary&) = default;
};

// Builds the Latest variant for one commit. Every endpoint must be a key of
// `known_entities`; otherwise Errc::Validation names the offending mention.
GraphVariant instantiate_latest(const std::string& subject_id, const std::vector<Triple>& triples,
                                const EntityTable& known_entities, std::int64_t previous_version);

// Union by identity key. Colliding keys union their evidence and keep the
// smallest first_seen. A new visit-level triple (visit, r, c) also inherits
// the evidence of earlier visit-level triples (visit', r, c) of the same
// subject, so repeated observations across visits accumulate on the newest edge.
// Re-merging an already merged version returns `historical` unchanged.
GraphVariant merge_into_historical(const GraphVariant& latest, const GraphVariant& historical);

class KgStore {
public:
    // In-memory store; with a log directory, existing subject logs are replayed.
    KgStore() = default;
    explicit KgStore(std::filesystem::path log_dir);

    KgStore(const KgStore&) = delete;
    KgStore& operator=(const KgStore&) = delete;

    std::shared_ptr<const SubjectSnapshot> find(const std::string& subject_id) const;
    // Throws Errc::NotFound.
    std::shared_ptr<const SubjectSnapshot> snapshot(const std::string& subject_id) const;

    // `tau` is required for Filtered and rejected otherwise.
    std::shared_ptr<const GraphVariant> get_variant(const std::string& subject_id, VariantKind kind,
                                                    std::optional<double> tau = {}) const;

    std::vector<SubjectSummary> list_subjects() const;
    bool has_record(const std::string& record_id) const;

    // Receives the current snapshot (null for a new subject) and returns the
    // next one. Runs under the subject's write lock. Throws Errc::Conflict if
    // `record_id` was already committed anywhere in the store.
    using Builder = std::function<SubjectSnapshot(const SubjectSnapshot* previous)>;
    std::shared_ptr<const SubjectSnapshot> commit(const std::string& subject_id, const std::string& record_id,
                                                  const Builder& build);

    const std::optional<std::filesystem::path>& log_dir() const { return log_dir_; }

private:
    struct Slot {
        std::mutex write_mu;
        mutable std::mutex read_mu;
        std::shared_ptr<const SubjectSnapshot> current;
    };

    Slot& slot_for(const std::string& subject_id);
    void replay(const std::filesystem::path& file);
    void append_log(const SubjectSnapshot& snap) const;

    std::optional<std::filesystem::path> log_dir_;
    mutable std::shared_mutex slots_mu_;
    std::map<std::string, std::unique_ptr<Slot>> slots_;
    mutable std::mutex records_mu_;
    std::set<std::string> record_ids_;
};

// One log line: {"version", "record_id", "subject_id", "visit_index",
// "source_kind", "timestamp", "entities", "triples", "scores"}.
json commit_log_entry(const SubjectSnapshot& snap);

} // namespace dkg
