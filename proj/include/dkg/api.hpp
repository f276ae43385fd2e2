#pragma once
// JSON-over-HTTP front end of the pipeline.

#include <memory>
#include <string>

#include "dkg/config.hpp"
#include "dkg/graph.hpp"

namespace dkg {

inline constexpr int kSchemaVersion = 1;

// Nodes sorted by id, edges by key. Score fields only on score-bearing kinds.
json export_graph(const GraphVariant& variant);

// Percent-encoding of "head|relation|tail" safe for one path segment.
std::string encode_edge_key(const TripleKey& key);
// Throws Errc::BadRequest.
TripleKey decode_edge_key(const std::string& encoded);

int http_status(Errc code);

class ApiServer {
public:
    explicit ApiServer(Services services);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    // Binds (port 0 picks a free port) and serves on a background thread.
    int start(const std::string& host, int port);
    // Binds and serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

    const Services& services() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace dkg
