#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

using namespace dkg;
using namespace dkg::test;

TEST_CASE("enum spellings round-trip") {
    for (auto t : {EntityType::Subject, EntityType::Visit, EntityType::Disease, EntityType::Procedure,
                   EntityType::Medication, EntityType::Concept}) {
        CHECK(parse_entity_type(to_string(t)) == t);
    }
    for (auto k : {VariantKind::Latest, VariantKind::Historical, VariantKind::Enriched, VariantKind::ConfidenceAware,
                   VariantKind::Filtered}) {
        CHECK(parse_variant_kind(to_string(k)) == k);
    }
    CHECK(parse_variant_kind("ConfidenceAware") == VariantKind::ConfidenceAware);
    CHECK(parse_variant_kind("confidence-aware") == VariantKind::ConfidenceAware);
    CHECK_THROWS_AS(parse_variant_kind("newest"), Error);
}

TEST_CASE("color roles follow the fixed map") {
    CHECK(color_role(EntityType::Subject) == "red");
    CHECK(color_role(EntityType::Visit) == "white");
    CHECK(color_role(EntityType::Disease) == "brown");
    CHECK(color_role(EntityType::Procedure) == "green");
    CHECK(color_role(EntityType::Medication) == "pink");
    CHECK(color_role(EntityType::Concept) == "gray");
}

TEST_CASE("triple keys") {
    const TripleKey k{"s1:v0", "prescribed", "C_ASP"};
    CHECK(k.str() == "s1:v0|prescribed|C_ASP");
    CHECK(TripleKey::parse(k.str()) == k);
    CHECK_THROWS_AS(TripleKey::parse("a|b"), Error);

    std::vector<std::string> ev{"r1", "r2"};
    union_evidence(ev, {"r2", "r3", "r1"});
    CHECK(ev == std::vector<std::string>{"r1", "r2", "r3"});
}

TEST_CASE("triple and scored triple JSON round-trip") {
    Triple t{"s1:v0", "prescribed", "C_ASP", 2, {"r1", "static:kg"}};
    CHECK(json(t).get<Triple>() == t);
    ScoredTriple st{t, 0.73, "why", {{"a", "b", "c"}}, {}};
    CHECK(json(st).get<ScoredTriple>() == st);
}

TEST_CASE("canonicalize") {
    const auto& dict = *fixture_dict();
    SUBCASE("ASA") {
        const auto c = canonicalize("ASA", dict);
        REQUIRE(std::holds_alternative<ConceptRef>(c));
        CHECK(std::get<ConceptRef>(c) == ConceptRef{"C_ASP", EntityType::Medication});
    }
    SUBCASE("trailing space and capital") {
        const auto c = canonicalize("Aspirin ", dict);
        REQUIRE(std::holds_alternative<ConceptRef>(c));
        CHECK(std::get<ConceptRef>(c).concept_id == "C_ASP");
    }
    SUBCASE("unknown") {
        const auto c = canonicalize("unobtainium", dict);
        REQUIRE(std::holds_alternative<Unmapped>(c));
        CHECK(std::get<Unmapped>(c).normalized == "unobtainium");
    }
}

TEST_CASE("dictionary") {
    const auto& dict = *fixture_dict();
    CHECK(dict.label("C_ASP") == "aspirin");
    CHECK(dict.entity("C_ASP").surface_forms == std::set<std::string>{"asa", "aspirin"});
    CHECK_THROWS_AS(dict.entity("C_NOPE"), Error);

    ConceptDictionary d;
    d.add("aspirin", {"C_ASP", EntityType::Medication, ""});
    CHECK_NOTHROW(d.add("Aspirin", {"C_ASP", EntityType::Medication, ""}));
    CHECK_THROWS_AS(d.add("aspirin", {"C_OTHER", EntityType::Medication, ""}), Error);
    CHECK_THROWS_AS(d.add("aspirin tablet", {"C_ASP", EntityType::Disease, ""}), Error);
}

TEST_CASE("bundled dictionary loads") {
    const auto& dict = *bundled_dict();
    CHECK(dict.concept_count() >= 50);
    CHECK(dict.lookup("ASA")->concept_id == "C_ASP");
    CHECK(dict.lookup("essential hypertension")->concept_id == "C_ESS_HTN");
}

TEST_CASE("tokenizer strips edge punctuation") {
    CHECK(tokenize_text("Started (Aspirin), then  warfarin.") ==
          std::vector<std::string>{"started", "aspirin", "then", "warfarin"});
}

TEST_CASE("gazetteer prefers the longest match") {
    const auto refs = GazetteerExtractor{}.extract("History of high blood pressure and AF", *fixture_dict());
    REQUIRE(refs.size() == 1);
    CHECK(refs[0].concept_id == "C_HTN");
}

TEST_CASE("record validation") {
    auto ok = record("s1", 0, {"hypertension"});
    CHECK_NOTHROW(validate(ok));
    auto bad = ok;
    bad.record_id.clear();
    CHECK_THROWS_AS(validate(bad), Error);
    bad = ok;
    bad.subject_id = "a|b";
    CHECK_THROWS_AS(validate(bad), Error);
    bad = ok;
    bad.visit_index = -1;
    CHECK_THROWS_AS(validate(bad), Error);
    bad = ok;
    bad.source_kind = SourceKind::Static;
    CHECK_THROWS_AS(validate(bad), Error);
    bad = record("s1", 0, {}, {}, {}, "started aspirin");
    CHECK_THROWS_AS(validate(bad), Error);
    bad.source_kind = SourceKind::FreeText;
    CHECK_NOTHROW(validate(bad));
}

TEST_CASE("record JSON round-trip") {
    const auto r = record("s1", 3, {"hypertension"}, {"echocardiogram"}, {"aspirin"}, "note");
    CHECK(json(r).get<SubjectRecord>() == r);
}

TEST_CASE("extract_triples") {
    const auto& dict = *fixture_dict();
    SUBCASE("one diagnosis, one medication") {
        const auto ex = extract_triples(record("s1", 0, {"hypertension"}, {}, {"aspirin"}), dict);
        REQUIRE(ex.triples.size() == 3);
        std::set<std::string> rels;
        for (const auto& t : ex.triples) {
            rels.insert(t.relation);
            CHECK(t.evidence == std::vector<std::string>{"s1-r0"});
            CHECK(t.first_seen == 0);
        }
        CHECK(rels == std::set<std::string>{"has_visit", "diagnosed_with", "prescribed"});
    }
    SUBCASE("empty visit") {
        const auto ex = extract_triples(record("s1", 2), dict);
        REQUIRE(ex.triples.size() == 1);
        CHECK(ex.triples[0].key() == TripleKey{"s1", "has_visit", "s1:v2"});
    }
    SUBCASE("note mention") {
        const auto ex = extract_triples(record("s1", 0, {"hypertension"}, {}, {}, "started aspirin"), dict);
        const auto has = std::any_of(ex.triples.begin(), ex.triples.end(), [](const Triple& t) {
            return t.key() == TripleKey{"s1:v0", "mentioned", "C_ASP"};
        });
        CHECK(has);
    }
    SUBCASE("unmapped mentions are reported") {
        const auto ex = extract_triples(record("s1", 0, {"hypertension", "unobtainium"}, {"levitation"}), dict);
        CHECK(ex.unmapped.size() == 2);
        CHECK(ex.triples.size() == 2);
    }
    SUBCASE("synonym forms collapse") {
        const auto a = extract_triples(record("s1", 0, {"hypertension"}, {}, {"asa"}), dict);
        const auto b = extract_triples(record("s1", 0, {"high blood pressure"}, {}, {"aspirin"}), dict);
        CHECK(a.triples == b.triples);
        CHECK(a.entities == b.entities);
    }
    SUBCASE("entities cover every endpoint") {
        const auto ex = extract_triples(record("s1", 1, {"hypertension"}, {"echocardiogram"}, {"asa"}), dict);
        for (const auto& t : ex.triples) {
            CHECK(ex.entities.contains(t.head));
            CHECK(ex.entities.contains(t.tail));
        }
        CHECK(ex.entities.at("s1").entity_type == EntityType::Subject);
        CHECK(ex.entities.at("s1:v1").entity_type == EntityType::Visit);
    }
}

TEST_CASE("ingest_record") {
    Pipeline p;
    SUBCASE("first record gives version 1") {
        const auto rep = p.engine->ingest_record(record("s1", 0, {"hypertension"}));
        CHECK(rep.version == 1);
    }
    SUBCASE("duplicate record id is rejected and the version holds") {
        p.engine->ingest_record(record("s1", 0, {"hypertension"}));
        auto dup = record("s1", 1, {"hypertension"});
        dup.record_id = "s1-r0";
        try {
            p.engine->ingest_record(dup);
            FAIL("expected a conflict");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::Conflict);
        }
        CHECK(p.store->snapshot("s1")->version == 1);
    }
    SUBCASE("two diagnoses and one medication give four triples") {
        const auto rep = p.engine->ingest_record(record("s1", 0, {"hypertension", "sepsis"}, {}, {"aspirin"}));
        CHECK(rep.n_triples == 4);
    }
    SUBCASE("unmapped count equals unmatched mentions") {
        const auto rep = p.engine->ingest_record(record("s1", 0, {"hypertension", "x1"}, {"x2"}, {"x3"}));
        CHECK(rep.n_unmapped == 3);
        CHECK(rep.unmapped.size() == 3);
    }
    SUBCASE("visit order must increase") {
        p.engine->ingest_record(record("s1", 1, {"hypertension"}));
        try {
            p.engine->ingest_record(record("s1", 0, {"hypertension"}));
            FAIL("expected a validation error");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::Validation);
        }
        CHECK(p.store->snapshot("s1")->version == 1);
        CHECK_FALSE(p.store->has_record("s1-r0"));
    }
}

TEST_CASE("same records give identical variants") {
    std::vector<SubjectRecord> recs{record("s1", 0, {"hypertension"}, {}, {"aspirin"}),
                                    record("s1", 1, {"hypertension", "atrial fibrillation"}, {}, {"warfarin"}),
                                    record("s2", 0, {"sepsis"}, {"echocardiogram"}, {})};
    Pipeline a, b;
    a.engine->ingest_all(recs);
    b.engine->ingest_all(recs);
    for (auto kind : {VariantKind::Latest, VariantKind::Historical, VariantKind::Enriched,
                      VariantKind::ConfidenceAware}) {
        CHECK(*a.store->get_variant("s1", kind) == *b.store->get_variant("s1", kind));
    }
}
