#pragma once

// AND-OR grammar model shared by the spatial, temporal and causal layers.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace stcaog {

enum class Layer { Spatial, Temporal, Causal };

enum class NodeKind { Terminal, And, Or };

std::string_view layer_tag(Layer layer);  // "S", "T", "C"
Layer parse_layer(std::string_view tag);

// Symbol names are short tokens; whitespace and the characters used by the
// logic renderer are reserved.
bool is_valid_symbol(std::string_view name);

struct Edge {
    std::string id;
    double p = 1.0;

    bool operator==(const Edge&) const = default;
};

struct Node {
    std::string id;
    NodeKind kind = NodeKind::And;
    std::vector<Edge> children;

    bool operator==(const Node&) const = default;
};

using NodeMap = std::map<std::string, Node, std::less<>>;
using SymbolSet = std::set<std::string, std::less<>>;

struct Violation {
    std::string node;
    std::string code;
    std::string message;
};

// Immutable <Omega, N, S, R, P>. Rules live in the child lists and the OR
// probabilities on the OR edges. And-children keep their order; Or-children
// are sorted by id on construction so equal grammars serialize identically.
class Grammar {
public:
    Grammar() = default;
    Grammar(Layer layer, std::string start, SymbolSet terminals,
            std::vector<Node> nonterminals);

    Layer layer() const { return layer_; }
    const std::string& start() const { return start_; }
    const SymbolSet& terminals() const { return terminals_; }
    const NodeMap& nodes() const { return nodes_; }

    bool is_terminal(std::string_view id) const;
    const Node* find(std::string_view id) const;  // non-terminals only
    bool contains(std::string_view id) const { return is_terminal(id) || find(id) != nullptr; }

    bool operator==(const Grammar&) const = default;

private:
    Layer layer_ = Layer::Spatial;
    std::string start_;
    SymbolSet terminals_;
    NodeMap nodes_;
    std::vector<std::string> duplicate_ids_;  // repeated non-terminal ids seen at construction

    friend std::vector<Violation> validate(const Grammar&);
};

std::vector<Violation> validate(const Grammar& grammar);

// Throws Error("invalid-grammar") listing the first violation.
void require_valid(const Grammar& grammar);

std::vector<std::string> sample_derivation(const Grammar& grammar, std::uint64_t seed);

// Non-terminals plus distinct terminals reachable from the start symbol.
std::size_t node_count(const Grammar& grammar);

SymbolSet reachable_terminals(const Grammar& grammar);

// Non-terminals in dependency order: every node appears after its children.
std::vector<std::string> topological_order(const Grammar& grammar);

std::string export_dot(const Grammar& grammar);

nlohmann::json to_json(const Grammar& grammar);
Grammar grammar_from_json(const nlohmann::json& doc);

// Fixed three-decimal rendering used for DOT edge labels.
std::string format_probability(double p);

}  // namespace stcaog
