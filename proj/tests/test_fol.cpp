#include <doctest.h>

#include <string_view>

#include "fixtures.hpp"
#include "stcaog/error.hpp"
#include "stcaog/fol.hpp"
#include "stcaog/rng.hpp"

using namespace stcaog;
using Kind = FolExpr::Kind;

namespace {

// Reader for the rendered form, used to check that rendering is unambiguous.
class Reader {
public:
    explicit Reader(std::string_view s) : s_(s) {}

    FolSentence sentence() {
        FolSentence out;
        while (take("∀") || take("∃")) {
            const auto q = last_ == "∀" ? Quantifier::ForAll : Quantifier::Exists;
            out.quantifiers.emplace_back(q, ident());
            take(" ");
        }
        if (!out.quantifiers.empty()) {
            expect("(");
            out.body = expr();
            expect(")");
        } else {
            out.body = expr();
        }
        if (take(" → ")) out.consequent = ident();
        REQUIRE(pos_ == s_.size());
        return out;
    }

private:
    FolExpr expr() {
        std::vector<FolExpr> parts = {term()};
        std::optional<Kind> kind;
        while (true) {
            if (take(" ∧ ")) {
                REQUIRE((!kind || *kind == Kind::And));
                kind = Kind::And;
            } else if (take(" ∨ ")) {
                REQUIRE((!kind || *kind == Kind::Or));
                kind = Kind::Or;
            } else {
                break;
            }
            parts.push_back(term());
        }
        if (!kind) return parts.front();
        FolExpr e;
        e.kind = *kind;
        e.children = std::move(parts);
        return e;
    }

    FolExpr term() {
        if (take("(")) {
            auto e = expr();
            REQUIRE(e.kind != Kind::Atom);
            expect(")");
            return e;
        }
        auto pred = ident();
        std::vector<std::string> args;
        if (take("(")) {
            do args.push_back(ident());
            while (take(", "));
            expect(")");
        }
        return FolExpr::atom(pred, args);
    }

    std::string ident() {
        const auto start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '(' && s_[pos_] != ')' && s_[pos_] != ',') ++pos_;
        REQUIRE(pos_ > start);
        return std::string(s_.substr(start, pos_ - start));
    }

    bool take(std::string_view t) {
        if (s_.substr(pos_, t.size()) != t) return false;
        last_ = t;
        pos_ += t.size();
        return true;
    }

    void expect(std::string_view t) { REQUIRE(take(t)); }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::string_view last_;
};

FolExpr random_expr(Rng& rng, int depth) {
    if (depth == 0 || rng.bernoulli(0.4)) {
        std::vector<std::string> args;
        const auto n = rng.uniform_int(0, 3);
        for (int i = 0; i < n; ++i) args.push_back("x" + std::to_string(rng.uniform_int(0, 9)));
        return FolExpr::atom("P" + std::to_string(rng.uniform_int(0, 9)), args);
    }
    std::vector<FolExpr> kids;
    const auto n = rng.uniform_int(1, 4);
    for (int i = 0; i < n; ++i) kids.push_back(random_expr(rng, depth - 1));
    return FolExpr::group(rng.bernoulli(0.5) ? Kind::And : Kind::Or, kids);
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::size_t at = 0;
    while (at < text.size()) {
        const auto nl = text.find('\n', at);
        out.push_back(text.substr(at, nl - at));
        at = nl + 1;
    }
    return out;
}

ParseGraph load_pg(const std::string& name) {
    return parse_graph_from_json(nlohmann::json::parse(read_text("data/fixtures/" + name + ".pg.json")));
}

}  // namespace

TEST_CASE("render: atoms, groups and quantifiers") {
    const auto a = FolExpr::atom("P", {"x", "y"});
    const auto b = FolExpr::atom("Q");
    const auto c = FolExpr::atom("R", {"z"});
    CHECK(render({{}, a, std::nullopt}) == "P(x, y)");
    CHECK(render({{}, FolExpr::group(Kind::And, {a, FolExpr::group(Kind::Or, {b, c})}), "G"}) ==
          "P(x, y) ∧ (Q ∨ R(z)) → G");
    CHECK(render({{{Quantifier::ForAll, "x"}}, c, std::nullopt}) == "∀x (R(z))");
    CHECK(render({{{Quantifier::Exists, "x"}, {Quantifier::Exists, "y"}}, FolExpr::group(Kind::Or, {a, c}),
                  std::nullopt}) == "∃x ∃y (P(x, y) ∨ R(z))");
    CHECK(FolExpr::group(Kind::And, {a}) == a);
    CHECK(render_numbered({{{}, b, std::nullopt}, {{}, c, "Q"}}) == "1. Q\n2. R(z) → Q\n");
}

TEST_CASE("render: the text reads back to the same sentence") {
    Rng rng(11);
    for (int i = 0; i < 500; ++i) {
        FolSentence s;
        const auto nq = rng.uniform_int(0, 2);
        for (int q = 0; q < nq; ++q)
            s.quantifiers.emplace_back(rng.bernoulli(0.5) ? Quantifier::ForAll : Quantifier::Exists,
                                       "O" + std::to_string(q));
        s.body = random_expr(rng, 3);
        if (rng.bernoulli(0.5)) s.consequent = "Intent";
        const auto text = render(s);
        CAPTURE(text);
        CHECK(Reader(text).sentence() == s);
    }
}

TEST_CASE("describe_aog: the composite fragment") {
    const auto text = render_numbered(describe_aog(load_stc("unified_fragment")));
    CHECK(text == read_text("data/golden/unified_fragment.aog.fol"));
    for (const auto& line : lines(text)) Reader(line.substr(line.find(". ") + 2)).sentence();
}

TEST_CASE("describe_aog: without cross-links only the C sentence remains") {
    auto aog = load_stc("unified_fragment");
    aog.links_ct.clear();
    aog.exogenous = {aog.c.terminals().begin(), aog.c.terminals().end()};
    const auto s = describe_aog(aog);
    REQUIRE(s.size() == 1);
    CHECK(render(s.front()) == "(C1(V1) ∨ C1(V2)) ∧ (C2(V3) ∨ C2(V4)) ∧ C3(V5) → Intent");
}

TEST_CASE("describe_aog: invalid composites are refused") {
    auto aog = load_stc("unified_fragment");
    aog.links_ts.pop_back();
    try {
        describe_aog(aog);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == std::string("invalid-aog"));
    }
}

TEST_CASE("describe_pg: the fragment restricted to one parse graph") {
    const auto text = render_numbered(describe_pg(load_pg("unified_fragment"), load_stc("unified_fragment")));
    CHECK(text == read_text("data/golden/unified_fragment.pg.fol"));
}

TEST_CASE("describe_pg: the offloading example") {
    const auto aog = load_stc("case_study");
    const Trace tr{"worked", {"USER", "CC", "CLOUD", "CC", "USER"}, std::nullopt, "O_c"};
    const auto text = render_numbered(describe_pg(viterbi_parse(aog, tr), aog));
    CHECK(text == read_text("data/golden/case_study.pg.fol"));
}

TEST_CASE("describe_pg: a link from a non-value is inconsistent") {
    auto pg = load_pg("unified_fragment");
    pg.links.push_back({"C1", "T2"});
    try {
        describe_pg(pg, load_stc("unified_fragment"));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == std::string("inconsistent-pg"));
    }
}
