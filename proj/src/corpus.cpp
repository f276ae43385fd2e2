#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "dkg/error.hpp"
#include "dkg/eval.hpp"

namespace dkg {

namespace {

enum class Slot { Diagnosis, Procedure, Medication };

struct RiskItem {
    std::string concept_id;
    Slot slot;
    std::vector<std::string> forms;  // first is the canonical mention
};

// Risk concepts of the bundled dictionary. Forms never cross concept ids.
const std::vector<RiskItem>& risk_items() {
    static const std::vector<RiskItem> items{
        {"C_SEPSIS", Slot::Diagnosis, {"sepsis", "septicemia"}},
        {"C_AKI", Slot::Diagnosis, {"acute kidney injury", "aki"}},
        {"C_HF", Slot::Diagnosis, {"heart failure", "chf", "congestive heart failure"}},
        {"C_RESPFAIL", Slot::Diagnosis, {"acute respiratory failure", "respiratory failure"}},
        {"C_MI", Slot::Diagnosis, {"myocardial infarction", "heart attack"}},
        {"C_STROKE", Slot::Diagnosis, {"stroke", "cerebrovascular accident", "cva"}},
        {"C_MECHVENT", Slot::Procedure, {"mechanical ventilation"}},
        {"C_DIALYSIS", Slot::Procedure, {"hemodialysis"}},
        {"C_INTUB", Slot::Procedure, {"endotracheal intubation"}},
        {"C_NOREPI", Slot::Medication, {"norepinephrine"}},
    };
    return items;
}

struct Chronic {
    std::string diagnosis;
    std::vector<std::string> medications;
    std::vector<std::string> note_words;  // class words usable in notes
};

const std::vector<Chronic>& chronic_conditions() {
    static const std::vector<Chronic> c{
        {"hypertension", {"metoprolol", "lisinopril", "amlodipine"}, {"beta blocker", "antihypertensive"}},
        {"type 2 diabetes", {"metformin", "insulin"}, {"antidiabetic agent"}},
        {"atrial fibrillation", {"warfarin", "apixaban"}, {"anticoagulant"}},
        {"hyperlipidemia", {"atorvastatin"}, {"statin"}},
        {"copd", {"albuterol"}, {}},
        {"hypothyroidism", {"levothyroxine"}, {}},
        {"gerd", {"omeprazole"}, {}},
        {"coronary artery disease", {"aspirin", "clopidogrel"}, {"antiplatelet agent"}},
        {"chronic kidney disease", {"furosemide"}, {"diuretic"}},
    };
    return c;
}

const std::vector<std::string> kAcuteDiagnoses{"pneumonia", "urinary tract infection", "anemia", "deep vein thrombosis"};
const std::vector<std::string> kAcuteProcedures{"echocardiogram", "chest x-ray", "head ct",
                                                "colonoscopy", "blood transfusion", "cardiac catheterization"};
const std::vector<std::string> kAcuteMedications{"vancomycin", "heparin", "piperacillin-tazobactam"};
// Mentions outside the dictionary, kept to exercise the unmapped path.
const std::vector<std::string> kUnmapped{"fatigue", "dizziness", "ankle edema", "insomnia"};

class Draw {
public:
    explicit Draw(std::uint64_t seed) : rng_(seed) {}

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return unit() < p; }
    template <class T>
    const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 rng_;
};

void push_unique(std::vector<std::string>& list, const std::string& s) {
    if (std::find(list.begin(), list.end(), s) == list.end()) list.push_back(s);
}

std::vector<std::string>& slot_list(SubjectRecord& r, Slot s) {
    switch (s) {
        case Slot::Diagnosis: return r.diagnoses;
        case Slot::Procedure: return r.procedures;
        case Slot::Medication: return r.medications;
    }
    return r.diagnoses;
}

std::string slot_relation(Slot s) {
    switch (s) {
        case Slot::Diagnosis: return std::string(relation::diagnosed_with);
        case Slot::Procedure: return std::string(relation::underwent);
        case Slot::Medication: return std::string(relation::prescribed);
    }
    return std::string(relation::diagnosed_with);
}

std::string visit_timestamp(int subject, int visit) {
    using namespace std::chrono;
    const sys_days day = sys_days{year{2021} / January / 1} + days{subject * 3 + visit * 30};
    const year_month_day ymd{day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT09:00:00Z", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string subject_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "P%03d", i + 1);
    return buf;
}

} // namespace

std::string_view to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::SingleEvidence: return "single_evidence";
        case NoiseKind::Conflicting: return "conflicting";
        case NoiseKind::Stale: return "stale";
    }
    return "single_evidence";
}

void CorpusSpec::validate() const {
    if (n_subjects < 2) fail(Errc::Validation, "corpus needs at least 2 subjects");
    if (visits_per_subject < 1) fail(Errc::Validation, "visits_per_subject must be >= 1");
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) fail(Errc::Validation, "noise_rate must be in [0, 1]");
}

const std::vector<std::string>& risk_mentions() {
    static const std::vector<std::string> mentions = [] {
        std::vector<std::string> m;
        for (const auto& r : risk_items()) m.push_back(r.forms.front());
        return m;
    }();
    return mentions;
}

std::set<std::string> default_risk_concepts() {
    std::set<std::string> ids;
    for (const auto& r : risk_items()) ids.insert(r.concept_id);
    return ids;
}

Corpus generate_corpus(const CorpusSpec& spec) {
    spec.validate();
    Draw draw(spec.seed);
    Corpus corpus;

    const int n = spec.n_subjects;
    const int visits = spec.visits_per_subject;
    const int n_pos = std::clamp(static_cast<int>(std::lround(0.3 * n)), 1, n - 1);

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    draw.shuffle(order);
    std::set<int> positives(order.begin(), order.begin() + n_pos);

    std::vector<std::size_t> planted_diseases;
    for (std::size_t i = 0; i < risk_items().size(); ++i) {
        if (risk_items()[i].slot == Slot::Diagnosis) planted_diseases.push_back(i);
    }

    for (int s = 0; s < n; ++s) {
        const auto sid = subject_name(s);
        const bool positive = positives.contains(s);
        corpus.labels[sid] = positive ? 1 : 0;

        std::optional<std::size_t> planted;
        int onset = 0;
        if (positive) {
            planted = draw.pick(planted_diseases);
            onset = static_cast<int>(draw.below(static_cast<std::size_t>(std::max(0, visits - 4) + 1)));
            corpus.planted_risk[sid] = risk_items()[*planted].concept_id;
        }

        std::vector<std::size_t> chronic_idx(chronic_conditions().size());
        for (std::size_t i = 0; i < chronic_idx.size(); ++i) chronic_idx[i] = i;
        draw.shuffle(chronic_idx);
        chronic_idx.resize(1 + draw.below(3));
        std::vector<std::string> chronic_meds;
        for (auto i : chronic_idx) chronic_meds.push_back(draw.pick(chronic_conditions()[i].medications));

        std::vector<std::size_t> noise_pool;
        for (std::size_t i = 0; i < risk_items().size(); ++i) {
            if (!planted || i != *planted) noise_pool.push_back(i);
        }
        draw.shuffle(noise_pool);

        const auto first = corpus.records.size();
        for (int v = 0; v < visits; ++v) {
            SubjectRecord r;
            r.subject_id = sid;
            r.record_id = sid + "-r" + std::to_string(v);
            r.visit_index = v;
            r.timestamp = visit_timestamp(s, v);
            r.source_kind = (v > 0 && draw.chance(0.15)) ? SourceKind::FreeText : SourceKind::Structured;

            for (std::size_t k = 0; k < chronic_idx.size(); ++k) {
                push_unique(r.diagnoses, chronic_conditions()[chronic_idx[k]].diagnosis);
                push_unique(r.medications, chronic_meds[k]);
            }
            if (draw.chance(0.4)) push_unique(r.diagnoses, draw.pick(kAcuteDiagnoses));
            if (draw.chance(0.5)) push_unique(r.procedures, draw.pick(kAcuteProcedures));
            if (draw.chance(0.3)) push_unique(r.medications, draw.pick(kAcuteMedications));
            if (draw.chance(0.2)) push_unique(r.diagnoses, draw.pick(kUnmapped));

            if (planted && v >= onset) {
                const auto& item = risk_items()[*planted];
                push_unique(r.diagnoses, draw.pick(item.forms));
            }

            if (draw.chance(0.4)) {
                const auto& c = chronic_conditions()[chronic_idx.front()];
                std::string note = "Continues " + chronic_meds.front() + ".";
                if (!c.note_words.empty()) note += " Tolerating " + draw.pick(c.note_words) + " well.";
                r.note_text = note;
            }
            corpus.records.push_back(std::move(r));

            if (noise_pool.empty() || !draw.chance(spec.noise_rate)) continue;
            auto kind = static_cast<NoiseKind>(draw.below(3));
            std::size_t item_idx = noise_pool.back();
            if (kind == NoiseKind::Conflicting) {
                auto it = std::find_if(noise_pool.rbegin(), noise_pool.rend(),
                                       [](std::size_t i) { return risk_items()[i].slot == Slot::Diagnosis; });
                if (it == noise_pool.rend()) {
                    kind = NoiseKind::SingleEvidence;
                } else {
                    item_idx = *it;
                }
            }
            noise_pool.erase(std::find(noise_pool.begin(), noise_pool.end(), item_idx));
            const auto& item = risk_items()[item_idx];
            const int target_visit = kind == NoiseKind::Stale ? 0 : v;
            auto& target = corpus.records[first + static_cast<std::size_t>(target_visit)];
            const auto& mention = item.forms.front();
            push_unique(slot_list(target, item.slot), mention);
            corpus.noise.push_back({sid, target_visit, kind, mention, slot_relation(item.slot)});
            if (kind == NoiseKind::Conflicting) {
                // The same concept also lands in the medication list.
                push_unique(target.medications, mention);
                corpus.noise.push_back({sid, target_visit, kind, mention, std::string(relation::prescribed)});
            }
        }
    }
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_records_jsonl(dir / "records.jsonl", corpus.records);
    std::ofstream out(dir / "labels.json", std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::Parse, "cannot write labels: " + (dir / "labels.json").string());
    out << json(corpus.labels).dump(2) << '\n';
}

std::map<std::string, int> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::Parse, "cannot open labels: " + path.string());
    try {
        const auto j = json::parse(in);
        std::map<std::string, int> labels;
        for (const auto& [k, v] : j.items()) {
            const int y = v.is_boolean() ? static_cast<int>(v.get<bool>()) : v.get<int>();
            if (y != 0 && y != 1) fail(Errc::Validation, "label for " + k + " must be 0 or 1");
            labels[k] = y;
        }
        return labels;
    } catch (const json::exception& e) {
        fail(Errc::Parse, path.string() + ": " + e.what());
    }
}

} // namespace dkg
