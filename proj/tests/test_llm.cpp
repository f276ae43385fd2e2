#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dkg/mock_llm.hpp"
#include "support.hpp"

using namespace dkg;
using namespace dkg::test;

namespace {

std::shared_ptr<HttpChatClient> client_for(const MockLlmServer& server, int timeout_ms = 2000) {
    LlmSettings s;
    s.base_url = server.base_url();
    s.timeout_ms = timeout_ms;
    return std::make_shared<HttpChatClient>(s);
}

const Triple kTarget{"s1:v0", "prescribed", "C_ASP", 0, {"s1-r0"}};

} // namespace

TEST_CASE("strict object parsing") {
    CHECK(parse_strict_object(R"({"score": 0.9})").has_value());
    CHECK(parse_strict_object("  {\"a\":1}\n").has_value());
    CHECK_FALSE(parse_strict_object(R"(Sure! {"score": 0.9})").has_value());
    CHECK_FALSE(parse_strict_object("[1,2]").has_value());
    CHECK_FALSE(parse_strict_object("").has_value());
}

TEST_CASE("prompt templates") {
    const PromptTemplate t("Q: {{question}} / {{missing}} / {{question}}");
    CHECK(t.render({{"question", "why"}}) == "Q: why / {{missing}} / why");
    CHECK(PromptTemplate::load_or("/nonexistent/file.txt", "fallback").text() == "fallback");
    CHECK(PromptTemplate::load_or(data_path("prompts/score_system.txt"), "x").text() == std::string(prompts::kScoreSystem));
}

TEST_CASE("http client against the mock server") {
    MockLlmServer server(std::vector<MockLlmServer::Reply>{{200, "hello", false}, {500, "", false}});
    server.start();
    auto client = client_for(server);
    CHECK(client->complete({"sys", "user"}) == "hello");
    CHECK_THROWS_AS(client->complete({"sys", "user"}), Error);
    const auto reqs = server.requests();
    REQUIRE(reqs.size() == 2);
    CHECK(reqs[0].at("messages").at(0).at("role") == "system");
    CHECK(reqs[0].at("messages").at(1).at("content") == "user");
    CHECK(reqs[0].at("model") == "mock-llm");
}

TEST_CASE("LLM scorer contract through HTTP") {
    const ScorerConfig cfg;
    SourceIndex idx;
    idx.add("s1-r0", SourceKind::Structured, 0);
    const ScoringEnv env{0, &idx};
    const auto heuristic = score_heuristic(kTarget, {}, cfg, env);

    SUBCASE("valid reply passes through") {
        MockLlmServer server(std::vector<MockLlmServer::Reply>{{200, R"({"score": 0.9, "rationale": "ok"})"}});
        server.start();
        CHECK(score_llm(kTarget, {}, env, *client_for(server), cfg).confidence == doctest::Approx(0.9));
    }
    SUBCASE("out of range clamps") {
        MockLlmServer server(std::vector<MockLlmServer::Reply>{{200, R"({"score": 1.7, "rationale": "x"})"}});
        server.start();
        CHECK(score_llm(kTarget, {}, env, *client_for(server), cfg).confidence == 1.0);
    }
    SUBCASE("malformed reply equals the heuristic") {
        MockLlmServer server(std::vector<MockLlmServer::Reply>{{200, "score: 1.7"}});
        server.start();
        const auto s = score_llm(kTarget, {}, env, *client_for(server), cfg);
        CHECK(s.confidence == heuristic.confidence);
        CHECK(s.rationale.find("fallback:heuristic") != std::string::npos);
    }
    SUBCASE("broken envelope equals the heuristic") {
        MockLlmServer server(std::vector<MockLlmServer::Reply>{{200, "not json at all", true}});
        server.start();
        CHECK(score_llm(kTarget, {}, env, *client_for(server), cfg).confidence == heuristic.confidence);
    }
}

TEST_CASE("endpoint outage does not abort ingestion") {
    int port = 0;
    {
        MockLlmServer probe(std::vector<MockLlmServer::Reply>{{200, "{}"}});
        port = probe.start();
    }
    LlmSettings s;
    s.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    s.timeout_ms = 500;
    auto chat = std::make_shared<HttpChatClient>(s);
    Pipeline p(fixture_dict(), fixture_kg(), std::make_shared<LlmScorer>(chat));
    Pipeline h;
    const auto r = record("s1", 0, {"hypertension"}, {}, {"aspirin"});
    CHECK(p.engine->ingest_record(r).version == 1);
    h.engine->ingest_record(r);
    const auto a = p.store->get_variant("s1", VariantKind::ConfidenceAware);
    const auto b = h.store->get_variant("s1", VariantKind::ConfidenceAware);
    REQUIRE(a->keys() == b->keys());
    for (const auto& [k, sc] : a->scored) CHECK(sc.confidence == b->scored.at(k).confidence);
}
