#include "dkg/enrich.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "dkg/error.hpp"

namespace dkg {

namespace {

// Returns a node on an is_a cycle, or empty when acyclic.
std::string find_is_a_cycle(const std::set<StaticEdge>& edges) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : edges) {
        if (e.relation == relation::is_a) adj[e.head].push_back(e.tail);
    }
    enum class Mark { None, Active, Done };
    std::map<std::string, Mark> mark;
    // Iterative DFS keeps deep hierarchies off the call stack.
    for (const auto& [root, _] : adj) {
        if (mark[root] != Mark::None) continue;
        std::vector<std::pair<std::string, std::size_t>> stack{{root, 0}};
        mark[root] = Mark::Active;
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            auto it = adj.find(node);
            if (it == adj.end() || next >= it->second.size()) {
                mark[node] = Mark::Done;
                stack.pop_back();
                continue;
            }
            const auto child = it->second[next++];
            auto& m = mark[child];
            if (m == Mark::Active) return child;
            if (m == Mark::None) {
                m = Mark::Active;
                stack.emplace_back(child, 0);
            }
        }
    }
    return {};
}

} // namespace

StaticKg StaticKg::from_edges(const std::vector<StaticEdge>& edges, std::string provenance) {
    StaticKg kg;
    kg.provenance_ = std::move(provenance);
    for (const auto& e : edges) {
        if (!is_static_relation(e.relation)) {
            fail(Errc::Validation, "unknown static relation: " + e.relation);
        }
        if (e.head.empty() || e.tail.empty()) fail(Errc::Validation, "static edge with empty endpoint");
        kg.edges_.insert(e);
        if (e.relation == relation::synonym_of) kg.edges_.insert({e.tail, e.relation, e.head});
    }
    if (auto node = find_is_a_cycle(kg.edges_); !node.empty()) {
        fail(Errc::Validation, "is_a cycle through " + node);
    }
    return kg;
}

StaticKg StaticKg::load(const std::filesystem::path& path, std::string provenance) {
    std::ifstream in(path);
    if (!in) fail(Errc::Parse, "cannot open static KG: " + path.string());
    std::vector<StaticEdge> edges;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            edges.push_back({j.at("head").get<std::string>(), j.at("relation").get<std::string>(),
                             j.at("tail").get<std::string>()});
        } catch (const json::exception& e) {
            fail(Errc::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (provenance.empty()) provenance = path.stem().string();
    return from_edges(edges, std::move(provenance));
}

GraphVariant enrich(const GraphVariant& historical, const StaticKg& static_kg) {
    GraphVariant out = historical;
    out.kind = VariantKind::Enriched;
    if (static_kg.empty()) return out;

    // Visit at which each entity first appears.
    std::map<std::string, int> appeared;
    for (const auto& [_, t] : historical.triples) {
        for (const auto* id : {&t.head, &t.tail}) {
            auto [it, inserted] = appeared.try_emplace(*id, t.first_seen);
            if (!inserted) it->second = std::min(it->second, t.first_seen);
        }
    }

    const auto evidence = static_evidence(static_kg);
    for (const auto& e : static_kg.edges()) {
        auto h = appeared.find(e.head);
        auto t = appeared.find(e.tail);
        if (h == appeared.end() || t == appeared.end()) continue;
        Triple triple{e.head, e.relation, e.tail, std::max(h->second, t->second), {evidence}};
        out.triples.try_emplace(triple.key(), std::move(triple));
    }
    return out;
}

} // namespace dkg
