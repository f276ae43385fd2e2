#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "dkg/graph.hpp"

namespace dkg {

struct StaticEdge {
    std::string head;
    std::string relation;  // synonym_of, is_a, interacts_with, treats
    std::string tail;

    friend auto operator<=>(const StaticEdge&, const StaticEdge&) = default;
};

// Curated background knowledge. Immutable after construction; synonym_of is
// stored in both directions and is_a is guaranteed acyclic.
class StaticKg {
public:
    StaticKg() = default;

    // JSON Lines of {"head", "relation", "tail"}. Provenance defaults to the file stem.
    static StaticKg load(const std::filesystem::path& path, std::string provenance = {});
    // Throws Errc::Validation on an unknown relation or an is_a cycle.
    static StaticKg from_edges(const std::vector<StaticEdge>& edges, std::string provenance);

    const std::set<StaticEdge>& edges() const { return edges_; }
    const std::string& provenance() const { return provenance_; }
    std::size_t size() const { return edges_.size(); }
    bool empty() const { return edges_.empty(); }

private:
    std::set<StaticEdge> edges_;
    std::string provenance_;
};

// Historical plus every static edge whose endpoints both already occur in
// Historical. A static edge's first_seen is the visit at which its later
// endpoint first appeared, i.e. the visit that made it eligible.
GraphVariant enrich(const GraphVariant& historical, const StaticKg& static_kg);

inline std::string static_evidence(const StaticKg& kg) { return "static:" + kg.provenance(); }

} // namespace dkg
