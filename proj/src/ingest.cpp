#include "dkg/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "dkg/error.hpp"

namespace dkg {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

} // namespace

// Trims punctuation at token edges so "aspirin." and "(aspirin)" both yield "aspirin".
std::vector<std::string> tokenize_text(std::string_view text) {
    std::vector<std::string> tokens;
    const auto norm = normalize_mention(text);
    std::size_t i = 0;
    while (i < norm.size()) {
        auto j = norm.find(' ', i);
        if (j == std::string::npos) j = norm.size();
        std::string_view tok(norm.data() + i, j - i);
        while (!tok.empty() && std::ispunct(static_cast<unsigned char>(tok.front()))) tok.remove_prefix(1);
        while (!tok.empty() && std::ispunct(static_cast<unsigned char>(tok.back()))) tok.remove_suffix(1);
        if (!tok.empty()) tokens.emplace_back(tok);
        i = j + 1;
    }
    return tokens;
}

namespace {

std::vector<std::string> string_list(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    return j.at(key).get<std::vector<std::string>>();
}

} // namespace

void validate(const SubjectRecord& r) {
    if (r.record_id.empty()) fail(Errc::Validation, "record_id must be non-empty");
    if (r.subject_id.empty()) fail(Errc::Validation, "subject_id must be non-empty");
    if (r.subject_id.find_first_of("|/") != std::string::npos) {
        fail(Errc::Validation, "subject_id must not contain '|' or '/': " + r.subject_id);
    }
    if (r.visit_index < 0) fail(Errc::Validation, "visit_index must be >= 0");
    if (r.source_kind == SourceKind::Static) {
        fail(Errc::Validation, "source_kind Static is reserved for background knowledge");
    }
    const bool lists_empty = r.diagnoses.empty() && r.procedures.empty() && r.medications.empty();
    if (r.source_kind == SourceKind::Structured && lists_empty && r.note_text) {
        fail(Errc::Validation, "structured record " + r.record_id +
                                   " carries only note_text; use source_kind FreeText");
    }
}

void to_json(json& j, const SubjectRecord& r) {
    j = json{{"record_id", r.record_id},
             {"subject_id", r.subject_id},
             {"visit_index", r.visit_index},
             {"timestamp", r.timestamp},
             {"source_kind", to_string(r.source_kind)},
             {"diagnoses", r.diagnoses},
             {"procedures", r.procedures},
             {"medications", r.medications}};
    if (r.note_text) j["note_text"] = *r.note_text;
}

void from_json(const json& j, SubjectRecord& r) {
    if (!j.is_object()) fail(Errc::Validation, "record must be a JSON object");
    try {
        r.record_id = j.at("record_id").get<std::string>();
        r.subject_id = j.value("subject_id", "");
        r.visit_index = j.at("visit_index").get<int>();
        r.timestamp = j.value("timestamp", "");
        r.source_kind = parse_source_kind(j.value("source_kind", "Structured"));
        r.diagnoses = string_list(j, "diagnoses");
        r.procedures = string_list(j, "procedures");
        r.medications = string_list(j, "medications");
        if (j.contains("note_text") && !j.at("note_text").is_null()) {
            r.note_text = j.at("note_text").get<std::string>();
        } else {
            r.note_text.reset();
        }
    } catch (const json::exception& e) {
        fail(Errc::Validation, std::string("invalid record: ") + e.what());
    }
}

std::vector<SubjectRecord> read_records_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::Parse, "cannot open records file: " + path.string());
    std::vector<SubjectRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (std::all_of(line.begin(), line.end(), is_space)) continue;
        try {
            out.push_back(json::parse(line).get<SubjectRecord>());
        } catch (const json::exception& e) {
            fail(Errc::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_records_jsonl(const std::filesystem::path& path, const std::vector<SubjectRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::Parse, "cannot write records file: " + path.string());
    for (const auto& r : records) out << json(r).dump() << '\n';
}

std::string normalize_mention(std::string_view mention) {
    std::string out;
    out.reserve(mention.size());
    bool pending_space = false;
    for (char c : mention) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

ConceptDictionary ConceptDictionary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::Parse, "cannot open dictionary: " + path.string());
    try {
        return from_json(nlohmann::ordered_json::parse(in));
    } catch (const nlohmann::ordered_json::exception& e) {
        fail(Errc::Parse, path.string() + ": " + e.what());
    }
}

ConceptDictionary ConceptDictionary::from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) fail(Errc::Parse, "dictionary must be a JSON object");
    ConceptDictionary dict;
    for (const auto& [form, v] : j.items()) {
        ConceptEntry e;
        e.concept_id = v.at("concept_id").get<std::string>();
        e.entity_type = parse_entity_type(v.value("entity_type", "Concept"));
        e.vocab = v.value("vocab", "");
        dict.add(form, e);
    }
    return dict;
}

void ConceptDictionary::add(std::string_view surface_form, const ConceptEntry& entry) {
    const auto key = normalize_mention(surface_form);
    if (key.empty()) fail(Errc::Validation, "empty surface form");
    if (entry.concept_id.empty()) fail(Errc::Validation, "empty concept_id for '" + key + "'");
    if (auto it = entries_.find(key); it != entries_.end()) {
        if (it->second.concept_id != entry.concept_id) {
            fail(Errc::Validation, "surface form '" + key + "' maps to both " +
                                       it->second.concept_id + " and " + entry.concept_id);
        }
        return;
    }
    auto [cit, inserted] = concepts_.try_emplace(entry.concept_id);
    auto& info = cit->second;
    if (inserted) {
        info.label = std::string(surface_form);
        info.entity_type = entry.entity_type;
        info.vocab = entry.vocab;
    } else if (info.entity_type != entry.entity_type) {
        fail(Errc::Validation, "concept " + entry.concept_id + " declared with two entity types");
    }
    info.forms.insert(key);
    entries_.emplace(key, entry);
}

const ConceptEntry* ConceptDictionary::lookup(std::string_view mention) const {
    auto it = entries_.find(normalize_mention(mention));
    return it == entries_.end() ? nullptr : &it->second;
}

Entity ConceptDictionary::entity(const std::string& concept_id) const {
    auto it = concepts_.find(concept_id);
    if (it == concepts_.end()) fail(Errc::NotFound, "unknown concept: " + concept_id);
    Entity e;
    e.concept_id = concept_id;
    e.label = it->second.label;
    e.surface_forms = it->second.forms;
    e.entity_type = it->second.entity_type;
    if (!it->second.vocab.empty()) e.source_vocabulary = it->second.vocab;
    return e;
}

std::string ConceptDictionary::label(const std::string& concept_id) const {
    auto it = concepts_.find(concept_id);
    return it == concepts_.end() ? concept_id : it->second.label;
}

Canonical canonicalize(std::string_view mention, const ConceptDictionary& dict) {
    if (const auto* e = dict.lookup(mention)) return ConceptRef{e->concept_id, e->entity_type};
    return Unmapped{normalize_mention(mention)};
}

std::vector<ConceptRef> GazetteerExtractor::extract(std::string_view text,
                                                    const ConceptDictionary& dict) const {
    const auto tokens = tokenize_text(text);
    // Tokenized forms grouped by first token, longest first.
    std::map<std::string, std::vector<std::pair<std::vector<std::string>, const ConceptEntry*>>> index;
    for (const auto& [form, entry] : dict.entries()) {
        auto ftoks = tokenize_text(form);
        if (ftoks.empty()) continue;
        index[ftoks.front()].emplace_back(std::move(ftoks), &entry);
    }
    for (auto& [_, forms] : index) {
        std::stable_sort(forms.begin(), forms.end(),
                         [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
    }

    std::vector<ConceptRef> out;
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t advance = 1;
        if (auto it = index.find(tokens[i]); it != index.end()) {
            for (const auto& [ftoks, entry] : it->second) {
                if (i + ftoks.size() > tokens.size()) continue;
                if (!std::equal(ftoks.begin(), ftoks.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
                    continue;
                }
                ConceptRef ref{entry->concept_id, entry->entity_type};
                if (std::find(out.begin(), out.end(), ref) == out.end()) out.push_back(ref);
                advance = ftoks.size();
                break;
            }
        }
        i += advance;
    }
    return out;
}

std::string subject_node_id(const std::string& subject_id) { return subject_id; }

std::string visit_node_id(const std::string& subject_id, int visit_index) {
    return subject_id + ":v" + std::to_string(visit_index);
}

Extraction extract_triples(const SubjectRecord& record, const ConceptDictionary& dict,
                           const MentionExtractor& extractor) {
    Extraction out;
    std::map<TripleKey, Triple> triples;

    const auto subject = subject_node_id(record.subject_id);
    const auto visit = visit_node_id(record.subject_id, record.visit_index);

    out.entities[subject] = Entity{subject, record.subject_id, {record.subject_id}, EntityType::Subject, {}};
    out.entities[visit] = Entity{visit, "Visit " + std::to_string(record.visit_index), {visit},
                                 EntityType::Visit, {}};

    auto emit = [&](const std::string& head, std::string_view rel, const std::string& tail) {
        Triple t{head, std::string(rel), tail, record.visit_index, {record.record_id}};
        triples.try_emplace(t.key(), std::move(t));
    };

    emit(subject, relation::has_visit, visit);

    auto emit_list = [&](const std::vector<std::string>& mentions, std::string_view rel) {
        for (const auto& m : mentions) {
            auto c = canonicalize(m, dict);
            if (auto* u = std::get_if<Unmapped>(&c)) {
                out.unmapped.push_back(std::move(*u));
                continue;
            }
            const auto& ref = std::get<ConceptRef>(c);
            out.entities.try_emplace(ref.concept_id, dict.entity(ref.concept_id));
            emit(visit, rel, ref.concept_id);
        }
    };
    emit_list(record.diagnoses, relation::diagnosed_with);
    emit_list(record.procedures, relation::underwent);
    emit_list(record.medications, relation::prescribed);

    if (record.note_text) {
        for (const auto& ref : extractor.extract(*record.note_text, dict)) {
            out.entities.try_emplace(ref.concept_id, dict.entity(ref.concept_id));
            emit(visit, relation::mentioned, ref.concept_id);
        }
    }

    out.triples.reserve(triples.size());
    for (auto& [_, t] : triples) out.triples.push_back(std::move(t));
    return out;
}

} // namespace dkg
