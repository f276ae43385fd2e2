#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include "dkg/api.hpp"
#include "support.hpp"

using namespace dkg;
using namespace dkg::test;

namespace {

struct Server {
    ApiServer api;
    int port;
    httplib::Client http;

    explicit Server(AppConfig cfg = {}, std::shared_ptr<ChatClient> chat = nullptr)
        : api(build_services(cfg, std::move(chat))), port(api.start("127.0.0.1", 0)), http("127.0.0.1", port) {
        http.set_read_timeout(20, 0);
    }

    httplib::Result post(const std::string& path, const json& body) {
        return http.Post(path, body.dump(), "application/json");
    }
    httplib::Result ingest(const SubjectRecord& r) { return post("/subjects/" + r.subject_id + "/records", json(r)); }

    void load_history(const std::string& s) {
        for (int v = 0; v < 4; ++v) {
            std::vector<std::string> rx{"metoprolol", "aspirin"};
            if (v == 3) rx.push_back("warfarin");
            REQUIRE(ingest(record(s, v, {"hypertension"}, {}, rx))->status == 200);
        }
    }
};

json body(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

} // namespace

TEST_CASE("edge key encoding") {
    const TripleKey k{"s 1:v0", "prescribed", "C_A/SP%"};
    const auto enc = encode_edge_key(k);
    CHECK(enc.find('|') == std::string::npos);
    CHECK(enc.find('/') == std::string::npos);
    CHECK(decode_edge_key(enc) == k);
    CHECK_THROWS_AS(decode_edge_key("a%2"), Error);
    CHECK(http_status(Errc::Conflict) == 409);
    CHECK(http_status(Errc::NotFound) == 404);
}

TEST_CASE("export shape") {
    Pipeline p;
    p.engine->ingest_record(record("s1", 0, {"hypertension"}, {}, {"aspirin"}));
    const auto h = export_graph(*p.store->get_variant("s1", VariantKind::Historical));
    CHECK(h.at("schema_version") == kSchemaVersion);
    CHECK(h.at("variant_kind") == "historical");
    for (const auto& e : h.at("edges")) CHECK_FALSE(e.contains("confidence"));
    const auto c = export_graph(*p.store->get_variant("s1", VariantKind::ConfidenceAware));
    for (const auto& e : c.at("edges")) {
        CHECK(e.contains("confidence"));
        CHECK(e.contains("rationale"));
    }
    std::vector<std::string> ids;
    for (const auto& n : c.at("nodes")) ids.push_back(n.at("id"));
    CHECK(std::is_sorted(ids.begin(), ids.end()));
}

TEST_CASE("health, subjects and ingest") {
    Server s;
    auto r = s.http.Get("/health");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(body(r).at("status") == "ok");
    CHECK(r->get_header_value("X-Schema-Version") == "1");

    CHECK(body(s.http.Get("/subjects")) == json::array());

    CHECK(body(s.ingest(record("p1", 0, {"hypertension"}))).at("version") == 1);
    CHECK(body(s.ingest(record("p1", 1, {"hypertension"}, {}, {"aspirin"}))).at("version") == 2);

    auto dup = record("p1", 2, {"hypertension"});
    dup.record_id = "p1-r1";
    const auto conflict = s.ingest(dup);
    CHECK(conflict->status == 409);
    CHECK(body(conflict).contains("error"));

    auto bad = record("p1", 0, {"hypertension"});
    bad.record_id = "p1-late";
    CHECK(s.ingest(bad)->status == 422);
    CHECK(s.post("/subjects/other/records", json(record("p1", 5)))->status == 422);
    CHECK(s.http.Post("/subjects/p1/records", "{nope", "application/json")->status == 400);

    const auto subjects = body(s.http.Get("/subjects"));
    REQUIRE(subjects.size() == 1);
    CHECK(subjects[0].at("version") == 2);
    CHECK(s.http.Get("/nowhere")->status == 404);
}

TEST_CASE("graph export over HTTP") {
    Server s;
    s.load_history("p1");
    const auto f = body(s.http.Get("/subjects/p1/graph?variant=filtered&tau=0.8"));
    CHECK(f.at("variant_kind") == "filtered");
    CHECK(f.at("tau") == 0.8);
    REQUIRE_FALSE(f.at("edges").empty());
    for (const auto& e : f.at("edges")) CHECK(e.at("confidence").get<double>() >= 0.8);

    const auto all = body(s.http.Get("/subjects/p1/graph?variant=confidence_aware"));
    CHECK(all.at("edges").size() > f.at("edges").size());

    const auto h = body(s.http.Get("/subjects/p1/graph"));
    CHECK(h.at("variant_kind") == "historical");
    for (const auto& e : h.at("edges")) CHECK_FALSE(e.contains("confidence"));

    CHECK(s.http.Get("/subjects/p1/graph?variant=filtered&tau=1.5")->status == 400);
    CHECK(s.http.Get("/subjects/p1/graph?variant=filtered&tau=abc")->status == 400);
    CHECK(s.http.Get("/subjects/p1/graph?variant=bogus")->status == 400);
    CHECK(s.http.Get("/subjects/zz/graph")->status == 404);
    CHECK(body(s.http.Get("/subjects/p1/graph?variant=filtered")).at("tau") == 0.8);
}

TEST_CASE("rationale endpoint") {
    Server s;
    s.load_history("p1");
    const auto g = body(s.http.Get("/subjects/p1/graph?variant=confidence_aware"));
    std::set<std::string> keys;
    for (const auto& e : g.at("edges")) keys.insert(e.at("key"));
    for (const auto& e : g.at("edges")) {
        const auto key = TripleKey::parse(e.at("key").get<std::string>());
        const auto r = body(s.http.Get("/subjects/p1/edges/" + encode_edge_key(key) + "/rationale"));
        for (const auto* f : {"confidence", "rationale", "supporting", "conflicting", "evidence"}) CHECK(r.contains(f));
        CHECK(r.at("confidence") == e.at("confidence"));
        for (const auto& k : r.at("supporting")) CHECK(keys.contains(k.get<std::string>()));
    }
    const auto missing = encode_edge_key({"p1:v0", "prescribed", "C_NONE"});
    CHECK(s.http.Get("/subjects/p1/edges/" + missing + "/rationale")->status == 404);
}

TEST_CASE("read endpoints are idempotent") {
    Server s;
    s.load_history("p1");
    for (const auto* path : {"/subjects", "/subjects/p1/graph?variant=historical",
                             "/subjects/p1/graph?variant=filtered&tau=0.5",
                             "/subjects/p1/graph?variant=enriched"}) {
        const auto a = s.http.Get(path);
        const auto b = s.http.Get(path);
        REQUIRE(a);
        REQUIRE(b);
        CHECK(a->status == 200);
        CHECK(a->body == b->body);
    }
    const json q{{"subject_id", "p1"}, {"question", "Which medications?"}, {"mode", "confidence_aware"}, {"tau", 0.8}};
    auto a = body(s.post("/qa", q));
    auto b = body(s.post("/qa", q));
    a.erase("created_at");
    b.erase("created_at");
    CHECK(a == b);
    CHECK(body(s.http.Get("/subjects")).at(0).at("version") == 4);
}

TEST_CASE("question answering") {
    Server s;
    s.load_history("p1");
    const auto base = body(s.post("/qa", {{"subject_id", "p1"}, {"question", "Is the patient on warfarin?"}}));
    CHECK(base.at("request").at("mode") == "baseline");
    CHECK(base.at("answer").get<std::string>().find("warfarin") != std::string::npos);
    CHECK(base.at("evidence").size() <= 5);

    const auto cmp = body(s.post("/qa", {{"subject_id", "p1"},
                                         {"question", "Which medications is the patient taking?"},
                                         {"mode", "confidence_aware"},
                                         {"tau", 0.8},
                                         {"compare", true}}));
    CHECK(cmp.contains("baseline"));
    CHECK(cmp.contains("confidence_aware"));
    CHECK(cmp.at("filtered_out").size() >= 1);

    CHECK(s.post("/qa", {{"subject_id", "nobody"}, {"question", "x"}})->status == 404);
    CHECK(s.post("/qa", {{"subject_id", "p1"}, {"question", "x"}, {"top_k", 0}})->status == 422);
    CHECK(s.post("/qa", {{"subject_id", "p1"}, {"question", "x"}, {"include_scores_in_prompt", true}})->status == 422);
}

TEST_CASE("generator failure maps to 502 with the exchange") {
    AppConfig cfg;
    cfg.generator = GeneratorKind::Llm;
    Server s(cfg, std::make_shared<ScriptedChat>(std::vector<std::string>{"!throw"}));
    s.load_history("p1");
    const auto r = s.post("/qa", {{"subject_id", "p1"}, {"question", "Is the patient on aspirin?"}});
    REQUIRE(r);
    CHECK(r->status == 502);
    const auto j = json::parse(r->body);
    CHECK_FALSE(j.at("exchange").at("evidence").empty());
}

TEST_CASE("what-if and eval endpoints") {
    Server s;
    const auto w = body(s.http.Post("/whatif/run", "", "application/json"));
    REQUIRE(w.at("results").size() >= 1);
    for (const auto& r : w.at("results")) {
        CHECK(r.at("injected_in_baseline") == true);
        CHECK(r.at("injected_in_confidence_aware") == false);
    }

    const auto e = body(s.post("/eval/run", {{"runs", 1}}));
    const auto id = e.at("report_id").get<std::string>();
    CHECK(e.at("csv").get<std::string>().rfind("method,variant,tau,auprc,auroc", 0) == 0);
    CHECK(body(s.http.Get("/eval/" + id)) == e);
    CHECK(s.http.Get("/eval/eval-999")->status == 404);
    // Evaluation does not touch the served store.
    CHECK(body(s.http.Get("/subjects")) == json::array());
}

TEST_CASE("shared secret") {
    AppConfig cfg;
    cfg.api_secret = "letmein";
    Server s(cfg);
    CHECK(s.http.Get("/health")->status == 200);
    CHECK(s.http.Get("/subjects")->status == 401);
    CHECK(s.http.Get("/subjects", httplib::Headers{{"X-DKG-Secret", "letmein"}})->status == 200);
}
