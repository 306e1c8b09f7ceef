#include "stcaog/parsing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>

#include "stcaog/error.hpp"

namespace stcaog {

namespace {

constexpr double kEps = 1e-12;
constexpr std::size_t kMaxTies = 64;
constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max() / 4;

using Event = std::pair<std::string, std::string>;  // (key base, chosen child)

std::string link_key(const std::string& terminal) { return "link:" + terminal; }

// Occurrence-keyed selection map from pre-order events.
std::map<std::string, std::string> keyed(const std::vector<Event>& events) {
    std::map<std::string, std::string> out;
    std::map<std::string, int> seen;
    for (const auto& [base, child] : events) {
        const int k = ++seen[base];
        out.emplace(k == 1 ? base : base + "#" + std::to_string(k), child);
    }
    return out;
}

std::vector<const CrossLink*> links_from(const std::vector<CrossLink>& links, const std::string& from) {
    std::vector<const CrossLink*> out;
    for (const auto& l : links)
        if (l.from == from) out.push_back(&l);
    return out;
}

double or_weight(const Grammar& g, const std::string& id, const std::string& child) {
    const Node* n = g.find(id);
    if (n && n->kind == NodeKind::Or)
        for (const auto& e : n->children)
            if (e.id == child) return e.p;
    return 0.0;
}

// ---------------------------------------------------------------------------
// Causal layer: selections implied by a chosen value and the evidence.

struct CChoice {
    std::map<std::string, std::string> selections;
    double log_weight = 0.0;
};

std::map<std::string, std::string> evidence_pins(const Grammar& c, const Trace& trace) {
    std::map<std::string, std::string> pins;
    if (!trace.features) return pins;
    for (const auto& [f, v] : *trace.features) {
        const Node* n = c_feature_node(c, f);
        if (!n) continue;
        const auto sym = c_value_symbol(c, f, v);
        if (!sym)
            throw Error("unparseable-trace", "value '" + feature_value_text(v) + "' of " + f + " is not in the grammar");
        pins[n->id] = *sym;
    }
    return pins;
}

class CSelector {
public:
    explicit CSelector(const Grammar& c) : c_(c) {}

    std::optional<CChoice> choose(const std::map<std::string, std::string>& pins, const std::string& value) {
        CChoice out;
        bool reached = false, ok = true;
        std::function<void(const std::string&)> visit = [&](const std::string& id) {
            if (id == value) reached = true;
            const Node* n = c_.find(id);
            if (!n || !ok) return;
            if (n->kind == NodeKind::And) {
                for (const auto& e : n->children) visit(e.id);
                return;
            }
            std::string choice;
            if (auto p = pins.find(id); p != pins.end()) {
                choice = p->second;
                for (const auto& e : n->children)
                    if (e.id != choice && holds(e.id, value)) ok = false;
            } else {
                for (const auto& e : n->children)
                    if (holds(e.id, value)) {
                        choice = e.id;
                        break;
                    }
            }
            if (choice.empty() || !ok) return;
            if (out.selections.count(id)) return;
            out.selections[id] = choice;
            out.log_weight += std::log(or_weight(c_, id, choice));
            visit(choice);
        };
        visit(c_.start());
        if (!ok || !reached) return std::nullopt;
        return out;
    }

private:
    bool holds(const std::string& id, const std::string& value) {
        if (id == value) return true;
        auto it = below_.find(id);
        if (it == below_.end()) {
            SymbolSet s;
            if (const Node* n = c_.find(id))
                for (const auto& e : n->children) {
                    s.insert(e.id);
                    if (c_.find(e.id)) {
                        holds(e.id, value);
                        const auto& sub = below_.at(e.id);
                        s.insert(sub.begin(), sub.end());
                    }
                }
            it = below_.emplace(id, std::move(s)).first;
        }
        return it->second.count(value) > 0;
    }

    const Grammar& c_;
    std::map<std::string, SymbolSet> below_;
};

// ---------------------------------------------------------------------------
// Combined T/S graph. T-terminals become choice nodes over their S links.

struct Entry {
    enum class Kind { Term, And, Or } kind = Kind::Term;
    std::string id;
    std::string event_base;  // empty: choice not recorded
    std::vector<int> children;
    std::vector<double> log_w;
    std::size_t min_len = 1;
};

class Combined {
public:
    explicit Combined(const StcAog& aog) {
        auto add = [&](Entry e) {
            entries.push_back(std::move(e));
            return static_cast<int>(entries.size() - 1);
        };
        for (const auto& t : aog.s.terminals()) s_index[t] = add({Entry::Kind::Term, t, "", {}, {}, 1});
        for (const auto& [id, n] : aog.s.nodes())
            s_index[id] = add({n.kind == NodeKind::And ? Entry::Kind::And : Entry::Kind::Or, id,
                               n.kind == NodeKind::Or ? id : "", {}, {}, 1});
        for (const auto& [id, n] : aog.s.nodes())
            for (const auto& e : n.children) {
                entries[s_index.at(id)].children.push_back(s_index.at(e.id));
                entries[s_index.at(id)].log_w.push_back(std::log(e.p));
            }
        for (const auto& a : aog.t.terminals()) {
            const auto links = links_from(aog.links_ts, a);
            Entry e{Entry::Kind::Or, a, links.size() > 1 ? link_key(a) : "", {}, {}, 1};
            for (const auto* l : links) {
                e.children.push_back(s_index.at(l->to));
                e.log_w.push_back(std::log(l->p));
            }
            t_index[a] = add(std::move(e));
        }
        for (const auto& [id, n] : aog.t.nodes())
            t_index[id] = add({n.kind == NodeKind::And ? Entry::Kind::And : Entry::Kind::Or, id,
                               n.kind == NodeKind::Or ? id : "", {}, {}, 1});
        for (const auto& [id, n] : aog.t.nodes())
            for (const auto& e : n.children) {
                entries[t_index.at(id)].children.push_back(t_index.at(e.id));
                entries[t_index.at(id)].log_w.push_back(std::log(e.p));
            }
        for (const auto& e : entries)
            if (e.children.size() >= 127) throw Error("arity-too-large", e.id + " has too many children");
        std::vector<int> state(entries.size(), 0);
        for (std::size_t k = 0; k < entries.size(); ++k) min_len(static_cast<int>(k), state);
    }

    std::vector<Entry> entries;
    std::map<std::string, int> s_index;
    std::map<std::string, int> t_index;

private:
    std::size_t min_len(int k, std::vector<int>& state) {
        auto& e = entries[k];
        if (state[k] == 2) return e.min_len;
        state[k] = 2;  // layer grammars are acyclic
        if (e.kind == Entry::Kind::Term) {
            e.min_len = 1;
        } else if (e.kind == Entry::Kind::And) {
            std::size_t v = 0;
            for (int c : e.children) v = std::min(kUnreachable, v + min_len(c, state));
            e.min_len = v;
        } else {
            std::size_t v = kUnreachable;
            for (int c : e.children) v = std::min(v, min_len(c, state));
            e.min_len = v;
        }
        return e.min_len;
    }
};

struct Cand {
    double score = 0.0;
    std::vector<Event> events;
};

void prune(std::vector<Cand>& v) {
    if (v.empty()) return;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : v) best = std::max(best, c.score);
    std::erase_if(v, [&](const Cand& c) { return c.score < best - kEps; });
    std::sort(v.begin(), v.end(), [](const Cand& a, const Cand& b) {
        return a.score != b.score ? a.score > b.score : a.events < b.events;
    });
    if (v.size() > kMaxTies) v.resize(kMaxTies);
}

// Max-product chart over the combined graph, keeping every near-best
// derivation per cell so ties resolve on the final selection map.
class Chart {
public:
    Chart(const Combined& g, std::span<const std::string> path) : g_(g), path_(path) {
        if (path.size() >= 1024) throw Error("path-too-long", "parser supports paths shorter than 1024 symbols");
    }

    const std::vector<Cand>& best(int node, std::size_t i, std::size_t j) {
        static const std::vector<Cand> none;
        const auto& e = g_.entries[node];
        if (j <= i || j - i < e.min_len) return none;
        if (e.kind == Entry::Kind::Term) {
            static const std::vector<Cand> unit = {Cand{}};
            return (j == i + 1 && path_[i] == e.id) ? unit : none;
        }
        if (e.kind == Entry::Kind::And) return seq(node, 0, i, j);
        const auto k = key(node, 127, i, j);
        if (auto it = memo_.find(k); it != memo_.end()) return it->second;
        std::vector<Cand> out;
        for (std::size_t c = 0; c < e.children.size(); ++c) {
            for (const auto& sub : best(e.children[c], i, j)) {
                Cand x{sub.score + e.log_w[c], {}};
                if (!e.event_base.empty()) x.events.push_back({e.event_base, g_.entries[e.children[c]].id});
                x.events.insert(x.events.end(), sub.events.begin(), sub.events.end());
                out.push_back(std::move(x));
            }
        }
        prune(out);
        return memo_.emplace(k, std::move(out)).first->second;
    }

private:
    const std::vector<Cand>& seq(int node, std::size_t m, std::size_t i, std::size_t j) {
        const auto& e = g_.entries[node];
        if (m + 1 == e.children.size()) return best(e.children[m], i, j);
        const auto k = key(node, m, i, j);
        if (auto it = memo_.find(k); it != memo_.end()) return it->second;
        std::size_t rest = 0;
        for (std::size_t r = m + 1; r < e.children.size(); ++r)
            rest = std::min(kUnreachable, rest + g_.entries[e.children[r]].min_len);
        std::vector<Cand> out;
        for (std::size_t s = i + 1; s + rest <= j; ++s) {
            const auto& left = best(e.children[m], i, s);
            if (left.empty()) continue;
            const auto& right = seq(node, m + 1, s, j);
            for (const auto& a : left)
                for (const auto& b : right) {
                    Cand x{a.score + b.score, a.events};
                    x.events.insert(x.events.end(), b.events.begin(), b.events.end());
                    out.push_back(std::move(x));
                }
        }
        prune(out);
        return memo_.emplace(k, std::move(out)).first->second;
    }

    static std::uint64_t key(int node, std::size_t m, std::size_t i, std::size_t j) {
        return ((static_cast<std::uint64_t>(node) * 128 + m) * 1024 + i) * 1024 + j;
    }

    const Combined& g_;
    std::span<const std::string> path_;
    std::unordered_map<std::uint64_t, std::vector<Cand>> memo_;
};

// ---------------------------------------------------------------------------

std::span<const std::string> observed_frontier(const StcAog& aog, const Trace& trace) {
    if (trace.path.size() <= aog.origin_len)
        throw Error("unparseable-trace", "trace '" + trace.id + "' has no symbols after its origin");
    std::span<const std::string> f(trace.path);
    f = f.subspan(aog.origin_len);
    for (const auto& sym : f)
        if (!aog.s.is_terminal(sym)) throw Error("unparseable-trace", "unknown symbol '" + sym + "'");
    return f;
}

struct Global {
    double score;
    std::map<std::string, std::string> selections;
    std::pair<std::string, std::string> link;
};

ParseGraph pick(const Trace& trace, std::vector<Global>& all) {
    if (all.empty()) throw Error("unparseable-trace", "no derivation of trace '" + trace.id + "' is consistent");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& g : all) best = std::max(best, g.score);
    const Global* chosen = nullptr;
    for (const auto& g : all) {
        if (g.score < best - kEps) continue;
        if (!chosen || g.selections < chosen->selections ||
            (g.selections == chosen->selections && g.link < chosen->link))
            chosen = &g;
    }
    return {trace.id, chosen->score, chosen->selections, {chosen->link}};
}

// Calls `each(value, op, link p, C choice)` for every consistent value/op pair.
template <typename F>
void for_each_link(const StcAog& aog, const Trace& trace, F&& each) {
    const auto pins = evidence_pins(aog.c, trace);
    CSelector selector(aog.c);
    for (const auto& l : aog.links_ct) {
        const auto choice = selector.choose(pins, l.from);
        if (!choice) continue;
        each(l, *choice);
    }
}

// Start-level choice leading to `op`, if the T start is an Or.
std::optional<Event> start_event(const Grammar& t, const std::string& op, double& log_w) {
    log_w = 0.0;
    if (op == t.start()) return std::nullopt;
    log_w = std::log(or_weight(t, t.start(), op));
    return Event{t.start(), op};
}

}  // namespace

ParseGraph viterbi_parse(const StcAog& aog, const Trace& trace) {
    const auto path = observed_frontier(aog, trace);
    const Combined g(aog);
    Chart chart(g, path);
    std::vector<Global> all;
    for_each_link(aog, trace, [&](const CrossLink& l, const CChoice& c) {
        double w = 0.0;
        const auto ev = start_event(aog.t, l.to, w);
        for (const auto& cand : chart.best(g.t_index.at(l.to), 0, path.size())) {
            std::vector<Event> events;
            if (ev) events.push_back(*ev);
            events.insert(events.end(), cand.events.begin(), cand.events.end());
            auto sel = keyed(events);
            sel.insert(c.selections.begin(), c.selections.end());
            all.push_back({c.log_weight + std::log(l.p) + w + cand.score, std::move(sel), {l.from, l.to}});
        }
    });
    return pick(trace, all);
}

ParseGraph brute_force_parse(const StcAog& aog, const Trace& trace, std::uint64_t cap) {
    const auto path = observed_frontier(aog, trace);
    const Combined g(aog);

    // Size of the selection space before enumerating anything.
    double combos = static_cast<double>(std::max<std::size_t>(1, aog.links_ct.size()));
    for (const auto& e : g.entries)
        if (e.kind == Entry::Kind::Or && (!e.event_base.empty() || e.children.size() > 1))
            combos *= static_cast<double>(std::max<std::size_t>(1, e.children.size()));
    if (combos > static_cast<double>(cap))
        throw Error("combinatorial-cap-exceeded", "selection space exceeds cap of " + std::to_string(cap));

    struct Derivation {
        std::vector<std::string> frontier;
        std::vector<Event> events;
        double score = 0.0;
    };
    std::map<int, std::vector<Derivation>> memo;
    std::function<const std::vector<Derivation>&(int)> all_of = [&](int node) -> const std::vector<Derivation>& {
        if (auto it = memo.find(node); it != memo.end()) return it->second;
        const auto& e = g.entries[node];
        std::vector<Derivation> out;
        if (e.kind == Entry::Kind::Term) {
            out.push_back({{e.id}, {}, 0.0});
        } else if (e.kind == Entry::Kind::Or) {
            for (std::size_t c = 0; c < e.children.size(); ++c)
                for (const auto& d : all_of(e.children[c])) {
                    Derivation x{d.frontier, {}, d.score + e.log_w[c]};
                    if (!e.event_base.empty()) x.events.push_back({e.event_base, g.entries[e.children[c]].id});
                    x.events.insert(x.events.end(), d.events.begin(), d.events.end());
                    // Longer than the trace can never match.
                    if (x.frontier.size() <= path.size()) out.push_back(std::move(x));
                }
        } else {
            out.push_back({});
            for (int c : e.children) {
                std::vector<Derivation> next;
                for (const auto& left : out)
                    for (const auto& right : all_of(c)) {
                        if (left.frontier.size() + right.frontier.size() > path.size()) continue;
                        Derivation x = left;
                        x.frontier.insert(x.frontier.end(), right.frontier.begin(), right.frontier.end());
                        x.events.insert(x.events.end(), right.events.begin(), right.events.end());
                        x.score += right.score;
                        next.push_back(std::move(x));
                    }
                out = std::move(next);
            }
        }
        return memo.emplace(node, std::move(out)).first->second;
    };

    const std::vector<std::string> observed(path.begin(), path.end());
    std::vector<Global> all;
    for_each_link(aog, trace, [&](const CrossLink& l, const CChoice& c) {
        double w = 0.0;
        const auto ev = start_event(aog.t, l.to, w);
        for (const auto& d : all_of(g.t_index.at(l.to))) {
            if (d.frontier != observed) continue;
            std::vector<Event> events;
            if (ev) events.push_back(*ev);
            events.insert(events.end(), d.events.begin(), d.events.end());
            auto sel = keyed(events);
            sel.insert(c.selections.begin(), c.selections.end());
            all.push_back({c.log_weight + std::log(l.p) + w + d.score, std::move(sel), {l.from, l.to}});
        }
    });
    return pick(trace, all);
}

PgTree selected_derivation(const ParseGraph& pg, const StcAog& aog, const std::string& op) {
    std::map<std::string, int> seen;
    auto take = [&](const std::string& base) -> const std::string& {
        const int k = ++seen[base];
        const auto key = k == 1 ? base : base + "#" + std::to_string(k);
        auto it = pg.selections.find(key);
        if (it == pg.selections.end()) throw Error("inconsistent-pg", "no selection for '" + key + "'");
        return it->second;
    };
    auto child_of = [](const Node& n, const std::string& id) {
        for (const auto& e : n.children)
            if (e.id == id) return true;
        return false;
    };

    std::function<PgTree(const std::string&)> walk_s = [&](const std::string& id) {
        const Node* n = aog.s.find(id);
        if (!n) return PgTree{Layer::Spatial, id, NodeKind::Terminal, {}};
        PgTree t{Layer::Spatial, id, n->kind, {}};
        if (n->kind == NodeKind::And) {
            for (const auto& e : n->children) t.children.push_back(walk_s(e.id));
        } else {
            const auto& c = take(id);
            if (!child_of(*n, c)) throw Error("inconsistent-pg", "'" + c + "' is not a child of " + id);
            t.children.push_back(walk_s(c));
        }
        return t;
    };
    std::function<PgTree(const std::string&)> walk_t = [&](const std::string& id) {
        const Node* n = aog.t.find(id);
        if (!n) {
            const auto links = links_from(aog.links_ts, id);
            if (links.empty()) throw Error("inconsistent-pg", "T terminal '" + id + "' has no S link");
            std::string target = links.front()->to;
            if (links.size() > 1) {
                target = take(link_key(id));
                if (std::none_of(links.begin(), links.end(), [&](const CrossLink* l) { return l->to == target; }))
                    throw Error("inconsistent-pg", "'" + target + "' is not linked from " + id);
            }
            return PgTree{Layer::Temporal, id, NodeKind::Terminal, {walk_s(target)}};
        }
        PgTree t{Layer::Temporal, id, n->kind, {}};
        if (n->kind == NodeKind::And) {
            for (const auto& e : n->children) t.children.push_back(walk_t(e.id));
        } else {
            const auto& c = take(id);
            if (!child_of(*n, c)) throw Error("inconsistent-pg", "'" + c + "' is not a child of " + id);
            t.children.push_back(walk_t(c));
        }
        return t;
    };

    if (!is_operation(aog.t, op)) throw Error("inconsistent-pg", "'" + op + "' is not an operation");
    if (op != aog.t.start() && take(aog.t.start()) != op)
        throw Error("inconsistent-pg", "start selection does not lead to " + op);
    return walk_t(op);
}

std::vector<std::string> frontier(const PgTree& tree) {
    if (tree.layer == Layer::Spatial && tree.kind == NodeKind::Terminal) return {tree.id};
    std::vector<std::string> out;
    for (const auto& c : tree.children) {
        auto sub = frontier(c);
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

double parse_log_likelihood(const ParseGraph& pg, const StcAog& aog) {
    double total = 0.0;
    for (const auto& [key, child] : pg.selections) {
        const Node* n = aog.c.find(key);
        if (n && n->kind == NodeKind::Or) {
            const double w = or_weight(aog.c, key, child);
            if (w <= 0.0) throw Error("inconsistent-pg", "'" + child + "' is not a child of " + key);
            total += std::log(w);
        }
    }
    for (const auto& [value, op] : pg.links) {
        const CrossLink* link = nullptr;
        for (const auto& l : aog.links_ct)
            if (l.from == value && l.to == op) link = &l;
        if (!link) throw Error("inconsistent-pg", "no link " + value + " -> " + op);
        total += std::log(link->p);
        if (op != aog.t.start()) total += std::log(or_weight(aog.t, aog.t.start(), op));
        std::function<void(const PgTree&)> add = [&](const PgTree& t) {
            if (t.kind == NodeKind::Or) {
                const Grammar& g = t.layer == Layer::Spatial ? aog.s : aog.t;
                total += std::log(or_weight(g, t.id, t.children.front().id));
            }
            if (t.layer == Layer::Temporal && t.kind == NodeKind::Terminal)
                for (const auto& l : aog.links_ts)
                    if (l.from == t.id && l.to == t.children.front().id) total += std::log(l.p);
            for (const auto& c : t.children) add(c);
        };
        add(selected_derivation(pg, aog, op));
    }
    return total;
}

nlohmann::json to_json(const ParseGraph& pg) {
    nlohmann::json sel = nlohmann::json::object();
    for (const auto& [k, v] : pg.selections) sel[k] = v;
    auto links = nlohmann::json::array();
    for (const auto& [v, o] : pg.links) links.push_back({v, o});
    return {{"trace_id", pg.trace_id}, {"log_likelihood", pg.log_likelihood}, {"selections", sel}, {"links", links}};
}

ParseGraph parse_graph_from_json(const nlohmann::json& doc) {
    try {
        ParseGraph pg;
        pg.trace_id = doc.at("trace_id").get<std::string>();
        pg.log_likelihood = doc.at("log_likelihood").get<double>();
        for (const auto& [k, v] : doc.at("selections").items()) pg.selections[k] = v.get<std::string>();
        if (doc.contains("links"))
            for (const auto& l : doc.at("links"))
                pg.links.emplace_back(l.at(0).get<std::string>(), l.at(1).get<std::string>());
        return pg;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed-pg", e.what());
    }
}

}  // namespace stcaog
