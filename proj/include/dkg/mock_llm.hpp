#pragma once
// Scripted chat-completions server for tests and offline demos.

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dkg/graph.hpp"

namespace httplib {
class Server;
}

namespace dkg {

class MockLlmServer {
public:
    struct Reply {
        int status = 200;
        std::string content;  // assistant message content
        bool raw = false;     // send `content` as the whole body, no envelope
    };

    using Responder = std::function<Reply(const json& request)>;

    // Replies are served in order; the last one repeats once the script runs out.
    explicit MockLlmServer(std::vector<Reply> script);
    explicit MockLlmServer(Responder responder);
    ~MockLlmServer();

    MockLlmServer(const MockLlmServer&) = delete;
    MockLlmServer& operator=(const MockLlmServer&) = delete;

    // Binds to `port` (0 picks a free one) and returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();
    // Blocks on the calling thread.
    void listen_blocking(const std::string& host, int port);

    std::string base_url() const;
    std::vector<json> requests() const;

    // Loads [{"status":200,"content":"..."}...] from a JSON file.
    static std::vector<Reply> load_script(const std::string& path);

private:
    void install_routes();
    Reply next(const json& request);

    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    Responder responder_;
    std::vector<Reply> script_;
    std::size_t cursor_ = 0;
    mutable std::mutex mu_;
    std::vector<json> requests_;
    std::string host_;
    int port_ = 0;
};

} // namespace dkg
