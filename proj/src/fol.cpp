#include "stcaog/fol.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "stcaog/error.hpp"

namespace stcaog {

FolExpr FolExpr::atom(std::string predicate, std::vector<std::string> args) {
    FolExpr e;
    e.predicate = std::move(predicate);
    e.args = std::move(args);
    return e;
}

FolExpr FolExpr::group(Kind kind, std::vector<FolExpr> children) {
    if (children.size() == 1) return std::move(children.front());
    FolExpr e;
    e.kind = kind;
    e.children = std::move(children);
    return e;
}

namespace {

using Kind = FolExpr::Kind;

std::string expr_text(const FolExpr& e, bool nested) {
    if (e.kind == Kind::Atom) {
        if (e.args.empty()) return e.predicate;
        std::string out = e.predicate + "(";
        for (std::size_t i = 0; i < e.args.size(); ++i) out += (i ? ", " : "") + e.args[i];
        return out + ")";
    }
    const char* sep = e.kind == Kind::And ? " ∧ " : " ∨ ";
    std::string out;
    for (std::size_t i = 0; i < e.children.size(); ++i) out += (i ? sep : "") + expr_text(e.children[i], true);
    return nested && e.children.size() > 1 ? "(" + out + ")" : out;
}

std::string predicate_of(const std::string& feature_node) {
    constexpr std::string_view suffix = ".v";
    if (feature_node.size() > suffix.size() && feature_node.ends_with(suffix))
        return feature_node.substr(0, feature_node.size() - suffix.size());
    return feature_node;
}

bool over_values(const Grammar& g, const Node& n) {
    return std::all_of(n.children.begin(), n.children.end(), [&](const Edge& e) { return g.is_terminal(e.id); });
}

FolExpr c_expr(const Grammar& c, const std::string& id, const ParseGraph* pg) {
    const Node* n = c.find(id);
    if (!n) return FolExpr::atom(id);
    const auto pred = predicate_of(id);
    std::vector<FolExpr> parts;
    if (n->kind == NodeKind::And) {
        for (const auto& e : n->children)
            parts.push_back(c.is_terminal(e.id) ? FolExpr::atom(pred, {e.id}) : c_expr(c, e.id, pg));
        return FolExpr::group(Kind::And, std::move(parts));
    }
    const bool values = over_values(c, *n);
    if (pg) {
        const auto sel = pg->selections.find(id);
        if (values) return FolExpr::atom(pred, {sel != pg->selections.end() ? sel->second : "*"});
        if (sel != pg->selections.end()) return c_expr(c, sel->second, pg);
    }
    for (const auto& e : n->children)
        parts.push_back(values ? FolExpr::atom(pred, {e.id}) : c_expr(c, e.id, pg));
    return FolExpr::group(Kind::Or, std::move(parts));
}

FolSentence c_sentence(const StcAog& aog, const ParseGraph* pg) {
    return {{}, c_expr(aog.c, aog.c.start(), pg), "Intent"};
}

// Every terminal sequence an S node can derive, in first-seen order.
std::vector<std::vector<std::string>> s_frontiers(const Grammar& s, const std::string& id) {
    const Node* n = s.find(id);
    if (!n) return {{id}};
    std::vector<std::vector<std::string>> out;
    auto add = [&](std::vector<std::string> f) {
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(std::move(f));
    };
    if (n->kind == NodeKind::Or) {
        for (const auto& e : n->children)
            for (auto& f : s_frontiers(s, e.id)) add(std::move(f));
        return out;
    }
    std::vector<std::vector<std::string>> acc = {{}};
    for (const auto& e : n->children) {
        std::vector<std::vector<std::string>> next;
        for (const auto& left : acc)
            for (const auto& right : s_frontiers(s, e.id)) {
                auto f = left;
                f.insert(f.end(), right.begin(), right.end());
                next.push_back(std::move(f));
            }
        acc = std::move(next);
    }
    for (auto& f : acc) add(std::move(f));
    return out;
}

FolExpr t_expr(const StcAog& aog, const std::string& id) {
    const Node* n = aog.t.find(id);
    std::vector<FolExpr> parts;
    if (!n) {
        for (const auto& l : aog.links_ts) {
            if (l.from != id) continue;
            for (auto& f : s_frontiers(aog.s, l.to)) {
                auto a = FolExpr::atom(id, std::move(f));
                if (std::find(parts.begin(), parts.end(), a) == parts.end()) parts.push_back(std::move(a));
            }
        }
        if (parts.empty()) throw Error("invalid-aog", "T terminal '" + id + "' has no S link");
        return FolExpr::group(Kind::Or, std::move(parts));
    }
    for (const auto& e : n->children) parts.push_back(t_expr(aog, e.id));
    return FolExpr::group(n->kind == NodeKind::And ? Kind::And : Kind::Or, std::move(parts));
}

FolExpr pg_expr(const PgTree& t) {
    if (t.layer == Layer::Temporal && t.kind == NodeKind::Terminal)
        return FolExpr::atom(t.id, frontier(t.children.front()));
    if (t.kind == NodeKind::Or) return pg_expr(t.children.front());
    std::vector<FolExpr> parts;
    for (const auto& c : t.children) parts.push_back(pg_expr(c));
    return FolExpr::group(Kind::And, std::move(parts));
}

std::vector<std::string> sorted_natural(std::vector<std::string> ids) {
    std::stable_sort(ids.begin(), ids.end(), NaturalLess{});
    return ids;
}

}  // namespace

std::string render(const FolSentence& s) {
    std::string out;
    for (const auto& [q, var] : s.quantifiers) {
        if (!out.empty()) out += ' ';
        out += (q == Quantifier::ForAll ? "∀" : "∃") + var;
    }
    if (s.quantifiers.empty())
        out = expr_text(s.body, false);
    else
        out += " (" + expr_text(s.body, false) + ")";
    if (s.consequent) out += " → " + *s.consequent;
    return out;
}

std::string render_numbered(const std::vector<FolSentence>& sentences) {
    std::ostringstream out;
    for (std::size_t i = 0; i < sentences.size(); ++i) out << (i + 1) << ". " << render(sentences[i]) << '\n';
    return out.str();
}

std::vector<FolSentence> describe_aog(const StcAog& aog) {
    try {
        require_valid(aog);
    } catch (const Error& e) {
        throw Error("invalid-aog", e.what());
    }
    std::vector<FolSentence> out = {c_sentence(aog, nullptr)};

    // Values in feature order, each with the operations it links to.
    std::vector<std::pair<std::string, std::string>> values;  // (predicate, value)
    for (const auto& [id, n] : aog.c.nodes()) {
        const bool values_node = n.kind == NodeKind::Or && over_values(aog.c, n);
        for (const auto& e : n.children)
            if (aog.c.is_terminal(e.id) && (values_node || n.kind == NodeKind::And))
                values.emplace_back(predicate_of(id), e.id);
    }
    std::stable_sort(values.begin(), values.end(),
                     [](const auto& a, const auto& b) { return NaturalLess{}(a.first, b.first); });
    std::set<std::string> done;
    for (const auto& [pred, v] : values) {
        if (!done.insert(v).second) continue;
        std::vector<std::string> ops;
        for (const auto& l : aog.links_ct)
            if (l.from == v) ops.push_back(l.to);
        if (ops.empty()) continue;
        ops = sorted_natural(std::move(ops));
        FolSentence s;
        const Quantifier q = ops.size() == 1 ? Quantifier::ForAll : Quantifier::Exists;
        std::vector<FolExpr> atoms;
        for (const auto& op : ops) {
            s.quantifiers.emplace_back(q, op);
            atoms.push_back(FolExpr::atom(v, {op}));
        }
        s.body = FolExpr::group(Kind::Or, std::move(atoms));
        out.push_back(std::move(s));
    }

    // Operations reached from the causal layer, top to bottom.
    std::vector<std::string> ops;
    for (const auto& l : aog.links_ct)
        if (std::find(ops.begin(), ops.end(), l.to) == ops.end()) ops.push_back(l.to);
    for (const auto& op : sorted_natural(std::move(ops))) {
        if (!aog.t.find(op)) continue;  // an operation without decomposition
        out.push_back({{}, t_expr(aog, op), op});
    }
    return out;
}

std::vector<FolSentence> describe_pg(const ParseGraph& pg, const StcAog& aog) {
    std::vector<FolSentence> out = {c_sentence(aog, &pg)};
    if (pg.links.empty()) return out;

    std::vector<std::string> ops;
    for (const auto& [v, op] : pg.links) {
        if (!aog.c.is_terminal(v)) throw Error("inconsistent-pg", "'" + v + "' is not a C value");
        if (std::find(ops.begin(), ops.end(), op) == ops.end()) ops.push_back(op);
    }
    FolSentence links;
    std::vector<FolExpr> atoms;
    for (const auto& op : ops) links.quantifiers.emplace_back(Quantifier::ForAll, op);
    for (const auto& [v, op] : pg.links) atoms.push_back(FolExpr::atom(v, {op}));
    links.body = FolExpr::group(Kind::And, std::move(atoms));
    out.push_back(std::move(links));

    for (const auto& op : ops) {
        if (!aog.t.find(op)) continue;
        out.push_back({{}, pg_expr(selected_derivation(pg, aog, op)), op});
    }
    return out;
}

}  // namespace stcaog
