// Command-line front end: serve, ingest, export, qa, eval, gen-corpus.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dkg/api.hpp"
#include "dkg/config.hpp"
#include "dkg/error.hpp"
#include "dkg/eval.hpp"
#include "dkg/mock_llm.hpp"

namespace {

using namespace dkg;

struct Globals {
    std::string config;
    std::string log_dir;
    std::string records;
    bool verbose = false;
};

AppConfig make_config(const Globals& g) {
    auto cfg = load_config(g.config.empty() ? std::nullopt : std::optional<std::filesystem::path>(g.config));
    if (!g.log_dir.empty()) cfg.log_dir = g.log_dir;
    return cfg;
}

// Services plus an optional preload of records into the store.
Services open_services(const Globals& g) {
    auto services = build_services(make_config(g));
    if (!g.records.empty()) services.engine->ingest_all(read_records_jsonl(g.records));
    return services;
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::Parse, "cannot write " + path);
    out << text;
}

// Offline stand-in for a chat endpoint: answers each prompt family in contract.
MockLlmServer::Reply demo_reply(const json& request) {
    std::string system;
    if (request.contains("messages") && request["messages"].is_array() && !request["messages"].empty()) {
        system = request["messages"][0].value("content", "");
    }
    if (system.find("\"score\"") != std::string::npos) {
        return {200, R"({"score": 0.75, "rationale": "mock assessment"})", false};
    }
    if (system.find("\"risk\"") != std::string::npos) return {200, R"({"risk": 0.5})", false};
    return {200, "Mock answer based on the supplied evidence.", false};
}

ApiServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic patient knowledge graphs with confidence scoring"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("-c,--config", g.config, "JSON config file");
    app.add_option("--log-dir", g.log_dir, "Persist subject logs here and replay them on start");
    app.add_flag("-v,--verbose", g.verbose, "Debug logging");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    std::string host;
    int port = -1;
    std::string static_dir;
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Bind port");
    serve->add_option("--static-dir", static_dir, "Directory served under /");
    serve->add_option("--records", g.records, "Records JSONL to ingest before serving");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Ingest a records JSONL file");
    std::string ingest_file;
    ingest->add_option("file", ingest_file, "Records JSONL")->required()->check(CLI::ExistingFile);

    // export
    auto* exp = app.add_subcommand("export", "Print one graph variant as JSON");
    std::string subject, variant = "historical";
    std::optional<double> tau;
    exp->add_option("subject", subject)->required();
    exp->add_option("variant", variant, "latest|historical|enriched|confidence_aware|filtered");
    exp->add_option("--tau", tau, "Threshold for the filtered variant");
    exp->add_option("--records", g.records, "Records JSONL to ingest first");

    // qa
    auto* qa = app.add_subcommand("qa", "Ask a question about one subject");
    std::string question, mode = "confidence_aware";
    std::size_t top_k = 0;
    bool compare = false;
    qa->add_option("subject", subject)->required();
    qa->add_option("question", question)->required();
    qa->add_option("--tau", tau, "Only use triples with confidence >= tau");
    qa->add_option("--top-k", top_k, "Evidence triples in the prompt");
    qa->add_option("--mode", mode, "baseline|confidence_aware");
    qa->add_flag("--compare", compare, "Run both pipelines side by side");
    qa->add_option("--records", g.records, "Records JSONL to ingest first");

    // eval
    auto* ev = app.add_subcommand("eval", "Outcome prediction over graph variants");
    EvalRequest eval_req;
    std::string eval_records, eval_labels, csv_out, json_out;
    std::string generator = "rule";
    ev->add_flag("--sweep", eval_req.sweep, "Every tau in 0.0..1.0 step 0.1");
    ev->add_option("--records", eval_records, "Records JSONL (with --labels)");
    ev->add_option("--labels", eval_labels, "Labels JSON (with --records)");
    ev->add_option("--seed", eval_req.corpus.seed, "Corpus seed");
    ev->add_option("--subjects", eval_req.corpus.n_subjects, "Corpus subjects");
    ev->add_option("--visits", eval_req.corpus.visits_per_subject, "Visits per subject");
    ev->add_option("--noise", eval_req.corpus.noise_rate, "Noise rate per record");
    ev->add_option("--tau", eval_req.tau, "Filter threshold without --sweep");
    ev->add_option("--runs", eval_req.runs, "Runs per row");
    ev->add_option("--generator", generator, "rule|hash|llm");
    ev->add_option("--csv", csv_out, "Write the CSV report here ('-' for stdout)");
    ev->add_option("--json", json_out, "Write the JSON report here");

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic records corpus");
    CorpusSpec spec;
    std::string out_dir = "corpus";
    gen->add_option("--out", out_dir, "Output directory");
    gen->add_option("--seed", spec.seed);
    gen->add_option("--subjects", spec.n_subjects);
    gen->add_option("--visits", spec.visits_per_subject);
    gen->add_option("--noise", spec.noise_rate);

    // whatif
    auto* whatif = app.add_subcommand("whatif", "Run scripted what-if scenarios");
    std::string scenarios;
    whatif->add_option("--scenarios", scenarios, "Scenario JSON (default: bundled)");

    // mock-llm
    auto* mock = app.add_subcommand("mock-llm", "Serve a scripted chat-completions endpoint");
    std::string script;
    int mock_port = 8081;
    mock->add_option("--port", mock_port);
    mock->add_option("--script", script, "JSON list of replies; default answers every prompt in contract");

    CLI11_PARSE(app, argc, argv);
    // stdout carries command output; logs go to stderr.
    spdlog::set_default_logger(spdlog::stderr_color_mt("dkg"));
    spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*serve) {
            auto cfg = make_config(g);
            if (!host.empty()) cfg.host = host;
            if (port >= 0) cfg.port = port;
            if (!static_dir.empty()) cfg.static_dir = static_dir;
            auto services = build_services(cfg);
            if (!g.records.empty()) services.engine->ingest_all(read_records_jsonl(g.records));
            ApiServer server(std::move(services));
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            server.listen(cfg.host, cfg.port);
            g_server = nullptr;
        } else if (*ingest) {
            auto services = open_services(g);
            for (const auto& rec : read_records_jsonl(ingest_file)) {
                std::cout << json(services.engine->ingest_record(rec)).dump() << '\n';
            }
        } else if (*exp) {
            auto services = open_services(g);
            const auto kind = parse_variant_kind(variant);
            if (kind == VariantKind::Filtered && !tau) tau = services.config.tau_default;
            std::cout << export_graph(*services.store->get_variant(subject, kind, tau)).dump(2) << '\n';
        } else if (*qa) {
            auto services = open_services(g);
            const auto k = top_k > 0 ? top_k : services.config.top_k_default;
            if (compare) {
                std::cout << json(services.qa->compare(subject, question, tau, k)).dump(2) << '\n';
            } else {
                QaRequest req;
                req.subject_id = subject;
                req.question = question;
                req.mode = parse_qa_mode(mode);
                req.tau = tau;
                req.top_k = k;
                const auto exchange = services.qa->ask(req);
                std::cout << exchange.answer << '\n';
                spdlog::debug("{}", json(exchange).dump());
            }
        } else if (*ev) {
            if (!eval_records.empty()) eval_req.records = std::filesystem::absolute(eval_records);
            if (!eval_labels.empty()) eval_req.labels = std::filesystem::absolute(eval_labels);
            eval_req.generator = parse_risk_generator(generator);
            auto cfg = make_config(g);
            const auto services = build_services(cfg);
            const auto outcome = run_eval(services, eval_req);
            if (!csv_out.empty()) write_text(csv_out, outcome.csv);
            if (!json_out.empty()) write_text(json_out, outcome.report.dump(2) + "\n");
            if (csv_out.empty() && json_out.empty()) std::cout << outcome.csv;
        } else if (*gen) {
            const auto corpus = generate_corpus(spec);
            write_corpus(corpus, out_dir);
            spdlog::info("wrote {} records for {} subjects to {}", corpus.records.size(), corpus.labels.size(),
                         out_dir);
        } else if (*whatif) {
            const auto services = build_services(make_config(g));
            const auto runner = services.whatif();
            const auto path = scenarios.empty() ? services.config.resolve(services.config.scenarios)
                                                : std::filesystem::path(scenarios);
            std::cout << json{{"results", runner.run_file(path)}}.dump(2) << '\n';
        } else if (*mock) {
            std::unique_ptr<MockLlmServer> server;
            if (script.empty()) {
                server = std::make_unique<MockLlmServer>(MockLlmServer::Responder(demo_reply));
            } else {
                server = std::make_unique<MockLlmServer>(MockLlmServer::load_script(script));
            }
            spdlog::info("mock LLM on 127.0.0.1:{}", mock_port);
            server->listen_blocking("127.0.0.1", mock_port);
        }
    } catch (const dkg::Error& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
