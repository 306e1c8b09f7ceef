#include "stcaog/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "stcaog/error.hpp"
#include "stcaog/rng.hpp"

namespace stcaog {

namespace {

constexpr double kWeightTolerance = 1e-9;

std::string_view kind_tag(NodeKind kind) {
    switch (kind) {
        case NodeKind::Terminal: return "terminal";
        case NodeKind::And: return "and";
        case NodeKind::Or: return "or";
    }
    return "and";
}

NodeKind parse_kind(std::string_view tag) {
    if (tag == "and") return NodeKind::And;
    if (tag == "or") return NodeKind::Or;
    if (tag == "terminal") return NodeKind::Terminal;
    throw Error("invalid-grammar", "unknown node kind '" + std::string(tag) + "'");
}

}  // namespace

std::string_view layer_tag(Layer layer) {
    switch (layer) {
        case Layer::Spatial: return "S";
        case Layer::Temporal: return "T";
        case Layer::Causal: return "C";
    }
    return "S";
}

Layer parse_layer(std::string_view tag) {
    if (tag == "S") return Layer::Spatial;
    if (tag == "T") return Layer::Temporal;
    if (tag == "C") return Layer::Causal;
    throw Error("invalid-layer", "expected S, T or C, got '" + std::string(tag) + "'");
}

bool is_valid_symbol(std::string_view name) {
    if (name.empty()) return false;
    static constexpr std::string_view kReserved[] = {"→", "∧", "∨", "∀", "∃"};
    for (char c : name) {
        if (c == '(' || c == ')' || c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
            c == '\v' || c == '\f')
            return false;
    }
    for (auto r : kReserved)
        if (name.find(r) != std::string_view::npos) return false;
    return true;
}

Grammar::Grammar(Layer layer, std::string start, SymbolSet terminals, std::vector<Node> nonterminals)
    : layer_(layer), start_(std::move(start)), terminals_(std::move(terminals)) {
    for (auto& node : nonterminals) {
        if (node.kind == NodeKind::And)
            for (auto& e : node.children) e.p = 1.0;
        if (node.kind == NodeKind::Or)
            std::stable_sort(node.children.begin(), node.children.end(),
                             [](const Edge& a, const Edge& b) { return a.id < b.id; });
        auto id = node.id;
        if (!nodes_.emplace(id, std::move(node)).second) duplicate_ids_.push_back(id);
    }
}

bool Grammar::is_terminal(std::string_view id) const { return terminals_.find(id) != terminals_.end(); }

const Node* Grammar::find(std::string_view id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

std::vector<Violation> validate(const Grammar& g) {
    std::vector<Violation> out;
    auto report = [&](const std::string& node, const char* code, std::string msg) {
        out.push_back({node, code, std::move(msg)});
    };

    for (const auto& id : g.duplicate_ids_) report(id, "duplicate-id", "non-terminal declared twice");
    for (const auto& t : g.terminals()) {
        if (!is_valid_symbol(t)) report(t, "bad-symbol", "reserved character or empty name");
        if (g.find(t)) report(t, "duplicate-id", "symbol is both terminal and non-terminal");
    }

    if (g.start().empty() || !g.find(g.start())) {
        report(g.start(), "missing-start",
               g.is_terminal(g.start()) ? "start symbol is a terminal" : "start symbol not among non-terminals");
    }

    for (const auto& [id, node] : g.nodes()) {
        if (!is_valid_symbol(id)) report(id, "bad-symbol", "reserved character or empty name");
        switch (node.kind) {
            case NodeKind::Terminal:
                report(id, "misplaced-terminal", "terminal listed among non-terminals");
                break;
            case NodeKind::And:
                if (node.children.size() < 2) report(id, "and-arity", "AND node needs at least two children");
                break;
            case NodeKind::Or: {
                if (node.children.empty()) {
                    report(id, "or-arity", "OR node needs at least one child");
                    break;
                }
                double sum = 0.0;
                bool range_ok = true;
                for (const auto& e : node.children) {
                    if (!(e.p > 0.0 && e.p <= 1.0)) range_ok = false;
                    sum += e.p;
                }
                if (!range_ok) report(id, "or-weight-range", "OR edge weight outside (0, 1]");
                if (std::fabs(sum - 1.0) > kWeightTolerance) {
                    std::ostringstream msg;
                    msg.precision(17);
                    msg << "OR edge weights sum to " << sum;
                    report(id, "or-weights-sum", msg.str());
                }
                break;
            }
        }
        for (const auto& e : node.children)
            if (!g.contains(e.id)) report(id, "dangling-child", "child '" + e.id + "' is not declared");
    }

    // Cycle detection and reachability by colored DFS from every node.
    std::map<std::string, int, std::less<>> color;
    std::set<std::string, std::less<>> reported_cycle;
    std::function<void(const std::string&)> visit = [&](const std::string& id) {
        color[id] = 1;
        const Node* n = g.find(id);
        for (const auto& e : n->children) {
            if (!g.find(e.id)) continue;
            int c = color[e.id];
            if (c == 1) {
                if (reported_cycle.insert(e.id).second) report(e.id, "cycle", "child relation is cyclic");
            } else if (c == 0) {
                visit(e.id);
            }
        }
        color[id] = 2;
    };
    if (g.find(g.start())) visit(g.start());
    std::set<std::string, std::less<>> reachable;
    for (const auto& [id, c] : color) reachable.insert(id);
    for (const auto& [id, node] : g.nodes()) {
        if (!reachable.count(id)) {
            report(id, "unreachable", "non-terminal not reachable from start");
            if (color[id] == 0) visit(id);
        }
    }
    return out;
}

void require_valid(const Grammar& g) {
    auto v = validate(g);
    if (!v.empty()) throw Error("invalid-grammar", v.front().node + ": " + v.front().code + " (" + v.front().message + ")");
}

std::vector<std::string> sample_derivation(const Grammar& g, std::uint64_t seed) {
    require_valid(g);
    Rng rng(seed);
    std::vector<std::string> out;
    std::function<void(const std::string&)> expand = [&](const std::string& id) {
        const Node* n = g.find(id);
        if (!n) {
            out.push_back(id);
            return;
        }
        if (n->kind == NodeKind::And) {
            for (const auto& e : n->children) expand(e.id);
            return;
        }
        const double u = rng.uniform();
        double acc = 0.0;
        const Edge* chosen = &n->children.back();
        for (const auto& e : n->children) {
            acc += e.p;
            if (u < acc) {
                chosen = &e;
                break;
            }
        }
        expand(chosen->id);
    };
    expand(g.start());
    return out;
}

SymbolSet reachable_terminals(const Grammar& g) {
    SymbolSet terms;
    std::set<std::string, std::less<>> seen;
    std::function<void(const std::string&)> walk = [&](const std::string& id) {
        if (!seen.insert(id).second) return;
        if (g.is_terminal(id)) {
            terms.insert(id);
            return;
        }
        if (const Node* n = g.find(id))
            for (const auto& e : n->children) walk(e.id);
    };
    if (g.find(g.start())) walk(g.start());
    return terms;
}

std::size_t node_count(const Grammar& g) { return g.nodes().size() + reachable_terminals(g).size(); }

std::vector<std::string> topological_order(const Grammar& g) {
    std::vector<std::string> order;
    std::set<std::string, std::less<>> done;
    std::function<void(const std::string&)> visit = [&](const std::string& id) {
        if (done.count(id)) return;
        done.insert(id);
        const Node* n = g.find(id);
        if (!n) return;
        for (const auto& e : n->children)
            if (g.find(e.id)) visit(e.id);
        order.push_back(id);
    };
    for (const auto& [id, node] : g.nodes()) visit(id);
    return order;
}

std::string format_probability(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", p);
    return buf;
}

namespace {

std::string dot_quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string export_dot(const Grammar& g) {
    require_valid(g);
    // Merge terminals and non-terminals into one id-ordered listing.
    std::map<std::string, const Node*> all;
    for (const auto& t : g.terminals()) all.emplace(t, nullptr);
    for (const auto& [id, n] : g.nodes()) all.emplace(id, &n);

    std::ostringstream out;
    out << "digraph " << dot_quote(std::string(layer_tag(g.layer())) + "-AOG") << " {\n";
    for (const auto& [id, n] : all) {
        const char* shape = !n ? "ellipse" : n->kind == NodeKind::And ? "box" : "diamond";
        out << "  " << dot_quote(id) << " [shape=" << shape << ", label=" << dot_quote(id) << "];\n";
    }
    for (const auto& [id, n] : all) {
        if (!n) continue;
        for (const auto& e : n->children) {
            out << "  " << dot_quote(id) << " -> " << dot_quote(e.id);
            if (n->kind == NodeKind::Or) out << " [label=" << dot_quote(format_probability(e.p)) << "]";
            out << ";\n";
        }
    }
    out << "}\n";
    return out.str();
}

nlohmann::json to_json(const Grammar& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& [id, n] : g.nodes()) {
        nlohmann::json children = nlohmann::json::array();
        for (const auto& e : n.children) children.push_back({{"id", e.id}, {"p", e.p}});
        nodes.push_back({{"id", id}, {"kind", kind_tag(n.kind)}, {"children", std::move(children)}});
    }
    nlohmann::json terminals = nlohmann::json::array();
    for (const auto& t : g.terminals()) terminals.push_back(t);
    return {{"layer", layer_tag(g.layer())},
            {"start", g.start()},
            {"terminals", std::move(terminals)},
            {"nodes", std::move(nodes)}};
}

Grammar grammar_from_json(const nlohmann::json& doc) {
    try {
        SymbolSet terminals;
        for (const auto& t : doc.at("terminals")) terminals.insert(t.get<std::string>());
        std::vector<Node> nodes;
        for (const auto& jn : doc.at("nodes")) {
            Node n;
            n.id = jn.at("id").get<std::string>();
            n.kind = parse_kind(jn.at("kind").get<std::string>());
            for (const auto& jc : jn.at("children"))
                n.children.push_back({jc.at("id").get<std::string>(), jc.value("p", 1.0)});
            nodes.push_back(std::move(n));
        }
        return Grammar(parse_layer(doc.at("layer").get<std::string>()), doc.at("start").get<std::string>(),
                       std::move(terminals), std::move(nodes));
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed-grammar", e.what());
    }
}

}  // namespace stcaog
