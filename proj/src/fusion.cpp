#include "stcaog/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include "stcaog/error.hpp"
#include "stcaog/induction.hpp"

namespace stcaog {

namespace {

std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct Range {
    double lo;
    double hi;
    std::string symbol;
};

// Parses "<feature>:<lo>..<hi>" (possibly with trailing disambiguation marks).
std::optional<Range> parse_range(const std::string& feature, const std::string& symbol) {
    const std::string prefix = feature + ":";
    if (symbol.rfind(prefix, 0) != 0) return std::nullopt;
    std::string body = symbol.substr(prefix.size());
    while (!body.empty() && body.back() == '\'') body.pop_back();
    const auto dots = body.find("..", 1);
    if (dots == std::string::npos) return std::nullopt;
    const std::string a = body.substr(0, dots), b = body.substr(dots + 2);
    char* end = nullptr;
    const double lo = std::strtod(a.c_str(), &end);
    if (end != a.c_str() + a.size()) return std::nullopt;
    const double hi = std::strtod(b.c_str(), &end);
    if (end != b.c_str() + b.size()) return std::nullopt;
    return Range{lo, hi, symbol};
}

const Node* or_node(const Grammar& g, const std::string& id) {
    const Node* n = g.find(id);
    return n && n->kind == NodeKind::Or ? n : nullptr;
}

nlohmann::json links_json(const std::vector<CrossLink>& links) {
    auto out = nlohmann::json::array();
    for (const auto& l : links) out.push_back({{"from", l.from}, {"to", l.to}, {"p", l.p}});
    return out;
}

std::vector<CrossLink> links_from_json(const nlohmann::json& doc) {
    std::vector<CrossLink> out;
    for (const auto& j : doc)
        out.push_back({j.at("from").get<std::string>(), j.at("to").get<std::string>(), j.at("p").get<double>()});
    return out;
}

std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::vector<MicroActionUse> annotate_micro_actions(const Grammar& s, const Corpus& corpus, std::size_t origin_len) {
    std::vector<MicroActionUse> out;
    std::map<std::vector<std::string>, std::string> cache;
    for (const auto& hop : segment_hops(corpus, origin_len)) {
        auto it = cache.find(hop.path);
        if (it == cache.end()) it = cache.emplace(hop.path, micro_action_of(s, hop.path)).first;
        out.push_back({it->second, it->second});
    }
    return out;
}

std::vector<CrossLink> link_s_to_t(const Grammar& s, const Grammar& t, const std::vector<MicroActionUse>& uses,
                                   const LinkOptions& options, std::vector<std::string>* unlinked) {
    if (uses.empty()) throw Error("unannotated-corpus", "no micro-action uses to count");
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    for (const auto& u : uses) {
        if (!t.is_terminal(u.action)) throw Error("unannotated-corpus", "'" + u.action + "' is not a T terminal");
        if (!s.contains(u.s_node)) throw Error("unannotated-corpus", "'" + u.s_node + "' is not an S node");
        ++counts[u.action][u.s_node];
    }
    std::vector<CrossLink> out;
    for (const auto& a : t.terminals()) {
        auto it = counts.find(a);
        if (it == counts.end()) {
            if (unlinked) unlinked->push_back(a);
            continue;
        }
        std::size_t total = 0, best = 0;
        for (const auto& [node, n] : it->second) {
            total += n;
            best = std::max(best, n);
        }
        for (const auto& [node, n] : it->second) {
            if (!options.soft && n != best) continue;
            out.push_back({a, node, static_cast<double>(n) / static_cast<double>(total)});
            if (!options.soft) break;  // first maximum is the smallest id
        }
    }
    return out;
}

const Node* c_feature_node(const Grammar& c, const std::string& feature) {
    // Only Or nodes directly over value terminals hold feature values.
    auto values = [&](const Node* n) {
        return n && std::all_of(n->children.begin(), n->children.end(),
                                [&](const Edge& e) { return c.is_terminal(e.id); });
    };
    if (const Node* n = or_node(c, feature + ".v"); values(n)) return n;
    if (const Node* n = or_node(c, feature); values(n)) return n;
    return nullptr;
}

std::optional<std::string> c_value_symbol(const Grammar& c, const std::string& feature, const FeatureValue& value) {
    const Node* n = c_feature_node(c, feature);
    if (!n) return std::nullopt;
    if (!is_numeric(value)) {
        const auto text = feature_value_text(value);
        for (const auto& e : n->children)
            if (e.id == text || e.id == feature + "=" + text) return e.id;
        return std::nullopt;
    }
    const double x = std::get<double>(value);
    std::vector<Range> ranges;
    for (const auto& e : n->children)
        if (auto r = parse_range(feature, e.id)) ranges.push_back(*r);
    if (ranges.empty()) {
        // Constant numeric feature: a single bare value symbol.
        const auto text = short_number(x);
        for (const auto& e : n->children)
            if (e.id == text || e.id == feature + "=" + text) return e.id;
        if (n->children.size() == 1) return n->children.front().id;
        return std::nullopt;
    }
    std::sort(ranges.begin(), ranges.end(), [](const Range& a, const Range& b) { return a.lo < b.lo; });
    for (std::size_t k = 0; k + 1 < ranges.size(); ++k)
        if (x < ranges[k + 1].lo) return ranges[k].symbol;
    return ranges.back().symbol;
}

bool is_operation(const Grammar& t, const std::string& id) {
    if (id == t.start()) return t.contains(id);
    const Node* start = or_node(t, t.start());
    if (!start) return false;
    return std::any_of(start->children.begin(), start->children.end(), [&](const Edge& e) { return e.id == id; });
}

std::vector<CrossLink> link_t_to_c(const Grammar& t, const Grammar& c,
                                   const std::vector<std::pair<std::string, FeatureRecord>>& records,
                                   const LinkOptions& options) {
    std::map<std::string, std::size_t> per_op;
    std::map<std::string, std::map<std::string, std::size_t>> joint;  // value -> op -> count
    for (const auto& [op, features] : records) {
        if (op.empty()) throw Error("untagged-dataset", "record without an operation tag");
        if (!is_operation(t, op)) throw Error("unknown-operation", "'" + op + "' is not an operation of the T grammar");
        ++per_op[op];
        for (const auto& [f, v] : features)
            if (auto sym = c_value_symbol(c, f, v)) ++joint[*sym][op];
    }
    std::vector<CrossLink> out;
    for (const auto& [value, ops] : joint) {
        std::size_t total = 0;
        double best = 0.0;
        for (const auto& [op, n] : ops) {
            total += n;
            best = std::max(best, static_cast<double>(n) / static_cast<double>(per_op[op]));
        }
        for (const auto& [op, n] : ops) {
            const double cond = static_cast<double>(n) / static_cast<double>(per_op[op]);
            if (options.soft || cond >= best - 1e-9)
                out.push_back({value, op, static_cast<double>(n) / static_cast<double>(total)});
        }
    }
    return out;
}

void require_valid(const StcAog& aog) {
    const std::pair<const Grammar*, Layer> layers[] = {
        {&aog.s, Layer::Spatial}, {&aog.t, Layer::Temporal}, {&aog.c, Layer::Causal}};
    std::map<std::string, std::string> or_ids;
    for (const auto& [g, layer] : layers) {
        const auto tag = std::string(layer_tag(layer));
        if (g->layer() != layer) throw Error("invalid-aog", tag + " grammar has the wrong layer tag");
        const auto v = validate(*g);
        if (!v.empty()) throw Error("invalid-aog", tag + " grammar: " + v.front().code + " at " + v.front().node);
        for (const auto& [id, n] : g->nodes()) {
            if (n.kind != NodeKind::Or) continue;
            auto [it, fresh] = or_ids.emplace(id, tag);
            if (!fresh) throw Error("duplicate-id", "Or node '" + id + "' occurs in " + it->second + " and " + tag);
        }
    }
    auto check_p = [](const std::vector<CrossLink>& links) {
        std::map<std::string, double> sums;
        for (const auto& l : links) {
            if (!(l.p > 0.0 && l.p <= 1.0)) throw Error("invalid-link", l.from + " -> " + l.to + " has p outside (0,1]");
            sums[l.from] += l.p;
        }
        for (const auto& [from, sum] : sums)
            if (sum > 1.0 + 1e-9) throw Error("invalid-link", "links from '" + from + "' sum above 1");
    };
    check_p(aog.links_ts);
    check_p(aog.links_ct);

    std::set<std::string> linked_t;
    for (const auto& l : aog.links_ts) {
        if (!aog.t.is_terminal(l.from)) throw Error("dangling-link", "'" + l.from + "' is not a T terminal");
        if (!aog.s.contains(l.to)) throw Error("dangling-link", "'" + l.to + "' is not an S node");
        linked_t.insert(l.from);
    }
    for (const auto& a : reachable_terminals(aog.t))
        if (!linked_t.count(a)) throw Error("unlinked-terminal", "T terminal '" + a + "' has no S link");

    std::set<std::string> linked_c;
    for (const auto& l : aog.links_ct) {
        if (!aog.c.is_terminal(l.from)) throw Error("dangling-link", "'" + l.from + "' is not a C value");
        if (!is_operation(aog.t, l.to)) throw Error("dangling-link", "'" + l.to + "' is not a T operation");
        linked_c.insert(l.from);
    }
    const std::set<std::string> exo(aog.exogenous.begin(), aog.exogenous.end());
    for (const auto& v : reachable_terminals(aog.c))
        if (!linked_c.count(v) && !exo.count(v))
            throw Error("unlinked-value", "C value '" + v + "' has no link and is not exogenous");
}

StcAog fuse(Grammar s, Grammar t, Grammar c, std::vector<CrossLink> links_ts, std::vector<CrossLink> links_ct,
            std::size_t origin_len) {
    StcAog aog{std::move(s), std::move(t), std::move(c), std::move(links_ts), std::move(links_ct), origin_len, {}};
    std::set<std::string> linked;
    for (const auto& l : aog.links_ct) linked.insert(l.from);
    for (const auto& v : aog.c.terminals())
        if (!linked.count(v)) aog.exogenous.push_back(v);
    require_valid(aog);
    return aog;
}

nlohmann::json to_json(const StcAog& aog) {
    return {{"s", to_json(aog.s)},
            {"t", to_json(aog.t)},
            {"c", to_json(aog.c)},
            {"links_ts", links_json(aog.links_ts)},
            {"links_ct", links_json(aog.links_ct)},
            {"origin_len", aog.origin_len},
            {"exogenous", aog.exogenous}};
}

StcAog stc_from_json(const nlohmann::json& doc) {
    StcAog aog;
    try {
        aog.s = grammar_from_json(doc.at("s"));
        aog.t = grammar_from_json(doc.at("t"));
        aog.c = grammar_from_json(doc.at("c"));
        aog.links_ts = links_from_json(doc.at("links_ts"));
        aog.links_ct = links_from_json(doc.at("links_ct"));
        aog.origin_len = doc.value("origin_len", std::size_t{0});
        if (doc.contains("exogenous")) aog.exogenous = doc.at("exogenous").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed-aog", e.what());
    } catch (const Error& e) {
        throw Error("malformed-aog", e.what());
    }
    require_valid(aog);
    return aog;
}

std::string export_dot(const StcAog& aog) {
    require_valid(aog);
    std::ostringstream out;
    out << "digraph \"STC-AOG\" {\n";
    const std::pair<const Grammar*, std::string> layers[] = {{&aog.c, "C"}, {&aog.t, "T"}, {&aog.s, "S"}};
    for (const auto& [g, tag] : layers) {
        auto q = [&, tag = tag](const std::string& id) { return dot_quote(tag + ":" + id); };
        out << "  subgraph " << dot_quote("cluster_" + tag) << " {\n";
        out << "    label=" << dot_quote(tag + "-AOG") << ";\n";
        std::set<std::string> ids(g->terminals().begin(), g->terminals().end());
        for (const auto& [id, n] : g->nodes()) ids.insert(id);
        for (const auto& id : ids) {
            const Node* n = g->find(id);
            const char* shape = !n ? "ellipse" : n->kind == NodeKind::And ? "box" : "diamond";
            out << "    " << q(id) << " [shape=" << shape << ", label=" << dot_quote(id) << "];\n";
        }
        for (const auto& [id, n] : g->nodes())
            for (const auto& e : n.children) {
                out << "    " << q(id) << " -> " << q(e.id);
                if (n.kind == NodeKind::Or) out << " [label=" << dot_quote(format_probability(e.p)) << "]";
                out << ";\n";
            }
        out << "  }\n";
    }
    for (const auto& l : aog.links_ct)
        out << "  " << dot_quote("C:" + l.from) << " -> " << dot_quote("T:" + l.to)
            << " [style=dashed, label=" << dot_quote(format_probability(l.p)) << "];\n";
    for (const auto& l : aog.links_ts)
        out << "  " << dot_quote("T:" + l.from) << " -> " << dot_quote("S:" + l.to)
            << " [style=dashed, label=" << dot_quote(format_probability(l.p)) << "];\n";
    out << "}\n";
    return out.str();
}

}  // namespace stcaog
