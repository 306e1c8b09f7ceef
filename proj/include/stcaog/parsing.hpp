#pragma once

// Interpretation of an observed trace against an STC-AOG: pick a C value, an
// operation linked from it, and T/S derivations whose frontier is the
// trace path, maximizing the joint log-likelihood.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stcaog/corpus.hpp"
#include "stcaog/fusion.hpp"

namespace stcaog {

// Selection keys: C Or nodes use their id. T/S Or nodes, and T-terminals
// with several S links (keyed "link:<terminal>"), use occurrence keys in
// pre-order: the first occurrence is the bare key, later ones "<key>#2",
// "<key>#3", ...
struct ParseGraph {
    std::string trace_id;
    double log_likelihood = 0.0;
    std::map<std::string, std::string> selections;
    std::vector<std::pair<std::string, std::string>> links;  // (C value, T operation) traversed

    bool operator==(const ParseGraph&) const = default;
};

ParseGraph viterbi_parse(const StcAog& aog, const Trace& trace);

inline constexpr std::uint64_t kDefaultBruteForceCap = 1000000;

// Exhaustive enumeration of derivations; test oracle for viterbi_parse.
ParseGraph brute_force_parse(const StcAog& aog, const Trace& trace, std::uint64_t cap = kDefaultBruteForceCap);

// The T/S derivation a parse graph selects under one operation. Or nodes
// keep their chosen child only; a T-terminal's child is its linked S node.
struct PgTree {
    Layer layer = Layer::Temporal;
    std::string id;
    NodeKind kind = NodeKind::Terminal;
    std::vector<PgTree> children;
};

PgTree selected_derivation(const ParseGraph& pg, const StcAog& aog, const std::string& op);

std::vector<std::string> frontier(const PgTree& tree);

// Recomputes the log-likelihood of `pg` from its selections and links.
double parse_log_likelihood(const ParseGraph& pg, const StcAog& aog);

nlohmann::json to_json(const ParseGraph& pg);
ParseGraph parse_graph_from_json(const nlohmann::json& doc);

}  // namespace stcaog
