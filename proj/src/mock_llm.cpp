#include "dkg/mock_llm.hpp"

#include <fstream>

#include <httplib.h>

#include "dkg/error.hpp"

namespace dkg {

MockLlmServer::MockLlmServer(std::vector<Reply> script)
    : server_(std::make_unique<httplib::Server>()), script_(std::move(script)) {
    install_routes();
}

MockLlmServer::MockLlmServer(Responder responder)
    : server_(std::make_unique<httplib::Server>()), responder_(std::move(responder)) {
    install_routes();
}

MockLlmServer::~MockLlmServer() { stop(); }

void MockLlmServer::install_routes() {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        const auto reply = next(body);
        res.status = reply.status;
        if (reply.raw) {
            res.set_content(reply.content, "application/json");
            return;
        }
        json envelope{{"id", "mock"},
                      {"object", "chat.completion"},
                      {"choices", json::array({json{{"index", 0},
                                                    {"message", {{"role", "assistant"}, {"content", reply.content}}},
                                                    {"finish_reason", "stop"}}})}};
        res.set_content(envelope.dump(), "application/json");
    };
    server_->Post(R"(/.*chat/completions)", handler);
    server_->Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });
}

MockLlmServer::Reply MockLlmServer::next(const json& request) {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    if (responder_) return responder_(request);
    if (script_.empty()) return Reply{500, "no scripted reply", true};
    const auto& r = script_[std::min(cursor_, script_.size() - 1)];
    ++cursor_;
    return r;
}

int MockLlmServer::start(const std::string& host, int port) {
    host_ = host;
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) fail(Errc::Upstream, "mock LLM could not bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void MockLlmServer::listen_blocking(const std::string& host, int port) {
    host_ = host;
    port_ = port;
    if (!server_->listen(host, port)) fail(Errc::Upstream, "mock LLM could not listen on port " + std::to_string(port));
}

void MockLlmServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::string MockLlmServer::base_url() const {
    return "http://" + host_ + ":" + std::to_string(port_) + "/v1";
}

std::vector<json> MockLlmServer::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::vector<MockLlmServer::Reply> MockLlmServer::load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::Parse, "cannot open mock script: " + path);
    std::vector<Reply> out;
    for (const auto& r : json::parse(in)) {
        out.push_back({r.value("status", 200), r.value("content", ""), r.value("raw", false)});
    }
    return out;
}

} // namespace dkg
