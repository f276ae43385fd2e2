#include "dkg/api.hpp"

#include <atomic>
#include <cctype>
#include <cstdio>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "dkg/error.hpp"

namespace dkg {

namespace {

constexpr const char* kJson = "application/json";

bool unreserved(unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == ':';
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

void send_json(httplib::Response& res, int status, json body) {
    if (body.is_object() && !body.contains("schema_version")) body["schema_version"] = kSchemaVersion;
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
    extra["error"] = message;
    extra["status"] = status;
    send_json(res, status, std::move(extra));
}

json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) fail(Errc::BadRequest, "request body is not valid JSON");
    return body;
}

std::optional<double> query_double(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    const auto raw = req.get_param_value(name);
    try {
        std::size_t used = 0;
        const double v = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        fail(Errc::BadRequest, std::string("query parameter ") + name + " is not a number: '" + raw + "'");
    }
}

} // namespace

int http_status(Errc code) {
    switch (code) {
        case Errc::NotFound: return 404;
        case Errc::Conflict: return 409;
        case Errc::Validation: return 422;
        case Errc::BadRequest: return 400;
        case Errc::Upstream: return 502;
        case Errc::Parse: return 400;
    }
    return 500;
}

std::string encode_edge_key(const TripleKey& key) {
    static const char* digits = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : key.str()) {
        if (unreserved(c)) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(digits[c >> 4]);
            out.push_back(digits[c & 15]);
        }
    }
    return out;
}

TripleKey decode_edge_key(const std::string& encoded) {
    std::string raw;
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        if (encoded[i] != '%') {
            raw.push_back(encoded[i]);
            continue;
        }
        const int hi = i + 2 < encoded.size() ? hex_value(encoded[i + 1]) : -1;
        const int lo = i + 2 < encoded.size() ? hex_value(encoded[i + 2]) : -1;
        if (hi < 0 || lo < 0) fail(Errc::BadRequest, "bad percent-encoding in edge key: " + encoded);
        raw.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
    }
    try {
        return TripleKey::parse(raw);
    } catch (const Error& e) {
        fail(Errc::BadRequest, e.what());
    }
}

json export_graph(const GraphVariant& variant) {
    json nodes = json::array();
    for (const auto& [id, e] : variant.entities) {
        nodes.push_back({{"id", id},
                         {"label", e.label},
                         {"entity_type", to_string(e.entity_type)},
                         {"color_role", color_role(e.entity_type)}});
    }
    json edges = json::array();
    for (const auto* t : variant.edges()) {
        const auto key = t->key();
        json edge{{"key", key.str()},
                  {"source", t->head},
                  {"relation", t->relation},
                  {"target", t->tail},
                  {"first_seen", t->first_seen},
                  {"evidence", t->evidence}};
        if (variant.score_bearing()) {
            const auto& s = variant.scored.at(key);
            edge["confidence"] = s.confidence;
            edge["rationale"] = s.rationale;
            json sup = json::array();
            for (const auto& k : s.supporting) sup.push_back(k.str());
            json con = json::array();
            for (const auto& k : s.conflicting) con.push_back(k.str());
            edge["supporting"] = std::move(sup);
            edge["conflicting"] = std::move(con);
        }
        edges.push_back(std::move(edge));
    }
    json out{{"schema_version", kSchemaVersion},
             {"subject_id", variant.subject_id},
             {"variant_kind", to_string(variant.kind)},
             {"version", variant.version},
             {"nodes", std::move(nodes)},
             {"edges", std::move(edges)}};
    if (variant.tau) out["tau"] = *variant.tau;
    return out;
}

struct ApiServer::Impl {
    Services services;
    httplib::Server server;
    std::thread thread;
    std::mutex reports_mu;
    std::map<std::string, json> reports;
    std::atomic<int> next_report{1};

    explicit Impl(Services s) : services(std::move(s)) { install(); }

    // Runs `fn`, translating library errors into HTTP responses.
    template <class Fn>
    void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const AnswerError& e) {
            send_error(res, 502, e.what(), json{{"exchange", e.partial()}});
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, std::string("invalid JSON payload: ") + e.what());
        } catch (const std::exception& e) {
            spdlog::error("unhandled error: {}", e.what());
            send_error(res, 500, e.what());
        }
    }

    void install() {
        server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            res.set_header("X-Schema-Version", std::to_string(kSchemaVersion));
            const auto& secret = services.config.api_secret;
            if (secret.empty() || req.path == "/health") return httplib::Server::HandlerResponse::Unhandled;
            if (req.get_header_value("X-DKG-Secret") != secret) {
                send_error(res, 401, "missing or wrong X-DKG-Secret header");
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });
        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (!res.body.empty()) return;
            send_error(res, res.status, res.status == 404 ? "no route for " + req.method + " " + req.path
                                                          : "request failed");
        });

        server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });

        server.Get("/subjects", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                json list = json::array();
                for (const auto& s : services.store->list_subjects()) {
                    const auto snap = services.store->find(s.subject_id);
                    list.push_back({{"subject_id", s.subject_id},
                                    {"visits", s.visits},
                                    {"version", snap ? snap->version : 0}});
                }
                send_json(res, 200, std::move(list));
            });
        });

        server.Post(R"(/subjects/([^/]+)/records)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto record = parse_body(req).get<SubjectRecord>();
                const std::string path_subject = req.matches[1];
                if (record.subject_id.empty()) record.subject_id = path_subject;
                if (record.subject_id != path_subject) {
                    fail(Errc::Validation, "subject_id '" + record.subject_id + "' does not match the path");
                }
                send_json(res, 200, json(services.engine->ingest_record(record)));
            });
        });

        server.Get(R"(/subjects/([^/]+)/graph)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string subject = req.matches[1];
                const auto kind = req.has_param("variant") ? parse_variant_kind(req.get_param_value("variant"))
                                                           : VariantKind::Historical;
                auto tau = query_double(req, "tau");
                if (tau) FilterThreshold check(*tau);
                if (kind == VariantKind::Filtered && !tau) tau = services.config.tau_default;
                send_json(res, 200, export_graph(*services.store->get_variant(subject, kind, tau)));
            });
        });

        server.Get(R"(/subjects/([^/]+)/edges/(.+)/rationale)",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           const std::string subject = req.matches[1];
                           // The router sees the decoded path, so the key arrives as "h|r|t".
                           const auto key = TripleKey::parse(std::string(req.matches[2]));
                           const auto graph =
                               services.store->get_variant(subject, VariantKind::ConfidenceAware, std::nullopt);
                           auto it = graph->scored.find(key);
                           if (it == graph->scored.end()) fail(Errc::NotFound, "unknown edge: " + key.str());
                           const auto& s = it->second;
                           json sup = json::array();
                           for (const auto& k : s.supporting) sup.push_back(k.str());
                           json con = json::array();
                           for (const auto& k : s.conflicting) con.push_back(k.str());
                           send_json(res, 200,
                                     {{"key", key.str()},
                                      {"confidence", s.confidence},
                                      {"rationale", s.rationale},
                                      {"supporting", sup},
                                      {"conflicting", con},
                                      {"evidence", s.triple.evidence},
                                      {"first_seen", s.triple.first_seen},
                                      {"version", graph->version}});
                       });
                   });

        server.Post("/qa", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = parse_body(req);
                auto request = body.get<QaRequest>();
                if (!body.contains("top_k")) request.top_k = services.config.top_k_default;
                if (body.value("compare", false)) {
                    request.validate();
                    const auto result =
                        services.qa->compare(request.subject_id, request.question, request.tau, request.top_k);
                    send_json(res, 200, json(result));
                } else {
                    send_json(res, 200, json(services.qa->ask(request)));
                }
            });
        });

        server.Post("/whatif/run", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto runner = services.whatif();
                const auto results = req.body.empty() ? runner.run_file(services.config.resolve(services.config.scenarios))
                                                      : runner.run(parse_body(req));
                send_json(res, 200, {{"results", results}});
            });
        });

        server.Post("/eval/run", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto request = req.body.empty() ? EvalRequest{} : parse_body(req).get<EvalRequest>();
                auto outcome = run_eval(services, request);
                const auto id = "eval-" + std::to_string(next_report++);
                outcome.report["report_id"] = id;
                outcome.report["csv"] = outcome.csv;
                {
                    std::lock_guard lock(reports_mu);
                    reports[id] = outcome.report;
                }
                send_json(res, 200, outcome.report);
            });
        });

        server.Get(R"(/eval/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                std::lock_guard lock(reports_mu);
                auto it = reports.find(req.matches[1]);
                if (it == reports.end()) fail(Errc::NotFound, "unknown report: " + std::string(req.matches[1]));
                send_json(res, 200, it->second);
            });
        });

        if (services.config.static_dir) {
            if (!server.set_mount_point("/", services.config.static_dir->string())) {
                spdlog::warn("static directory {} not found; UI not served", services.config.static_dir->string());
            }
        }
    }
};

ApiServer::ApiServer(Services services) : impl_(std::make_unique<Impl>(std::move(services))) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                                : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) fail(Errc::BadRequest, "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    spdlog::info("listening on {}:{}", host, bound);
    return bound;
}

void ApiServer::listen(const std::string& host, int port) {
    spdlog::info("listening on {}:{}", host, port);
    if (!impl_->server.listen(host, port)) fail(Errc::BadRequest, "cannot bind " + host + ":" + std::to_string(port));
}

void ApiServer::stop() {
    if (!impl_) return;
    if (impl_->server.is_running()) impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

const Services& ApiServer::services() const { return impl_->services; }

} // namespace dkg
