#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace dkg;
using namespace dkg::test;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Loaded {
    Corpus corpus;
    Pipeline pipe{bundled_dict(), bundled_kg()};
    explicit Loaded(CorpusSpec spec) : corpus(generate_corpus(spec)) { pipe.engine->ingest_all(corpus.records); }

    PredictionTask task(int runs = 3) const {
        PredictionTask t;
        for (const auto& [s, _] : corpus.labels) t.subject_ids.push_back(s);
        t.labels = corpus.labels;
        t.predictor.risk_concepts = default_risk_concepts();
        t.runs = runs;
        return t;
    }
};

GraphVariant graph_with(std::vector<Triple> ts) {
    GraphVariant g;
    g.kind = VariantKind::Historical;
    g.subject_id = "s";
    for (auto& t : ts) g.triples.emplace(t.key(), t);
    return g;
}

} // namespace

TEST_CASE("corpus generation") {
    const CorpusSpec spec;
    const auto a = generate_corpus(spec);
    const auto b = generate_corpus(spec);
    CHECK(a.records.size() == 100);
    CHECK(a.labels.size() == 20);
    CHECK(json(a.records) == json(b.records));
    CHECK(a.labels == b.labels);

    CorpusSpec other = spec;
    other.seed = 8;
    CHECK(json(generate_corpus(other).records) != json(a.records));

    CorpusSpec clean = spec;
    clean.noise_rate = 0.0;
    CHECK(generate_corpus(clean).noise.empty());
    CHECK_FALSE(a.noise.empty());

    int pos = 0;
    for (const auto& [_, y] : a.labels) pos += y;
    CHECK(pos > 0);
    CHECK(pos < 20);
    CHECK(a.planted_risk.size() == static_cast<std::size_t>(pos));

    CorpusSpec bad = spec;
    bad.noise_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = spec;
    bad.n_subjects = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("written corpus is byte-identical across runs") {
    const auto base = std::filesystem::temp_directory_path() / ("dkg-eval-" + std::to_string(std::random_device{}()));
    write_corpus(generate_corpus({}), base / "a");
    write_corpus(generate_corpus({}), base / "b");
    CHECK(slurp(base / "a" / "records.jsonl") == slurp(base / "b" / "records.jsonl"));
    CHECK(slurp(base / "a" / "labels.json") == slurp(base / "b" / "labels.json"));
    CHECK(read_labels(base / "a" / "labels.json") == generate_corpus({}).labels);
    std::filesystem::remove_all(base);
}

TEST_CASE("noise scores low and planted risk scores high") {
    for (std::uint64_t seed : {1u, 7u, 11u}) {
        CorpusSpec spec;
        spec.seed = seed;
        Loaded l(spec);
        const auto& dict = *bundled_dict();
        for (const auto& n : l.corpus.noise) {
            const auto ref = dict.lookup(n.mention);
            REQUIRE(ref != nullptr);
            const auto conf = l.pipe.store->get_variant(n.subject_id, VariantKind::ConfidenceAware);
            const TripleKey k{visit_node_id(n.subject_id, n.visit_index), n.relation, ref->concept_id};
            REQUIRE_MESSAGE(conf->scored.contains(k), k.str());
            CHECK_MESSAGE(conf->scored.at(k).confidence < 0.8, k.str(), " ", to_string(n.kind));
        }
        for (const auto& [sid, concept_id] : l.corpus.planted_risk) {
            const auto snap = l.pipe.store->snapshot(sid);
            const auto last = visit_node_id(sid, snap->last_visit);
            bool found = false;
            for (const auto& [k, s] : snap->confidence->scored) {
                if (k.head == last && k.tail == concept_id) {
                    found = true;
                    CHECK_MESSAGE(s.confidence >= 0.8, k.str());
                }
            }
            CHECK_MESSAGE(found, sid);
        }
    }
}

TEST_CASE("risk predictor") {
    const RiskPredictor rule;
    PredictorConfig cfg;
    SUBCASE("no risk triples gives zero") {
        CHECK(rule.predict(graph_with({}), cfg, 0).risk == 0.0);
        CHECK(rule.predict(graph_with({{"s", "has_visit", "s:v0", 0, {"r"}}}), cfg, 0).risk == 0.0);
    }
    SUBCASE("rule mass") {
        const auto g = graph_with({{"s:v0", "diagnosed_with", "C_SEPSIS", 0, {"r"}}, {"s:v0", "prescribed", "C_ASP", 0, {"r"}}});
        CHECK(rule.predict(g, cfg, 0).risk == doctest::Approx(1.0 - std::exp(-2.0)));
        cfg.risk_concepts = {"C_SEPSIS"};
        CHECK(rule.predict(g, cfg, 0).risk == doctest::Approx(1.0 - std::exp(-1.0)));
    }
    SUBCASE("hash is seeded and bounded") {
        cfg.generator = RiskGenerator::Hash;
        const auto g = graph_with({{"s:v0", "diagnosed_with", "C_SEPSIS", 0, {"r"}}});
        const auto a = rule.predict(g, cfg, 1).risk;
        CHECK(a == rule.predict(g, cfg, 1).risk);
        CHECK(a != rule.predict(g, cfg, 2).risk);
        CHECK(a >= 0.0);
        CHECK(a < 1.0);
    }
    SUBCASE("llm pass-through") {
        cfg.generator = RiskGenerator::Llm;
        const RiskPredictor llm(std::make_shared<ScriptedChat>(std::vector<std::string>{R"({"risk":0.7})"}));
        const auto p = llm.predict(graph_with({}), cfg, 0);
        CHECK(p.risk == doctest::Approx(0.7));
        CHECK_FALSE(p.fallback);
    }
    SUBCASE("llm malformed reply falls back with a flag") {
        cfg.generator = RiskGenerator::Llm;
        const RiskPredictor llm(std::make_shared<ScriptedChat>(std::vector<std::string>{"risk is high"}));
        const auto p = llm.predict(graph_with({}), cfg, 0);
        CHECK(p.risk == 0.5);
        CHECK(p.fallback);
        const RiskPredictor down(std::make_shared<ScriptedChat>(std::vector<std::string>{"!throw"}));
        CHECK(down.predict(graph_with({}), cfg, 0).fallback);
    }
    SUBCASE("risk prompt lists scores only for score-bearing variants") {
        auto g = graph_with({{"s:v0", "diagnosed_with", "C_SEPSIS", 0, {"r"}}});
        CHECK(rule.risk_prompt(g).user.find("[confidence") == std::string::npos);
    }
}

TEST_CASE("evaluation and sweep") {
    Loaded l(CorpusSpec{});
    const RiskPredictor predictor;
    SUBCASE("three runs are averaged") {
        const auto r = evaluate(l.task(3), *l.pipe.store, predictor);
        REQUIRE(r.per_run.size() == 3);
        CHECK(r.n_subjects == 20);
        CHECK(r.auroc == doctest::Approx((r.per_run[0].auroc + r.per_run[1].auroc + r.per_run[2].auroc) / 3));
        CHECK(r.auprc == doctest::Approx((r.per_run[0].auprc + r.per_run[1].auprc + r.per_run[2].auprc) / 3));
    }
    SUBCASE("empty grid gives the two reference rows") {
        const auto rows = run_sweep(l.task(1), {}, *l.pipe.store, predictor);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].variant == VariantKind::Historical);
        CHECK(rows[1].variant == VariantKind::ConfidenceAware);
    }
    SUBCASE("default grid") {
        const auto grid = default_tau_grid();
        REQUIRE(grid.size() == 11);
        CHECK(grid.front() == 0.0);
        CHECK(grid.back() == 1.0);
        const auto rows = run_sweep(l.task(3), grid, *l.pipe.store, predictor);
        CHECK(rows.size() == 13);
        for (const auto& r : rows) CHECK(r.report.per_run.size() == 3);
        const auto csv = sweep_csv(rows);
        CHECK(csv.rfind("method,variant,tau,auprc,auroc\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 14);
        CHECK(sweep_json(rows).at("rows").size() == 13);
    }
    SUBCASE("task validation") {
        auto t = l.task();
        t.runs = 0;
        CHECK_THROWS_AS(t.validate(), Error);
        t = l.task();
        t.labels.erase(t.subject_ids.front());
        CHECK_THROWS_AS(t.validate(), Error);
    }
}
