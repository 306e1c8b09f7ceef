#include <doctest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "stcaog/error.hpp"
#include "stcaog/induction.hpp"

using namespace stcaog;

namespace {

Corpus corpus_of(const std::vector<std::vector<std::string>>& paths) {
    Corpus c;
    int k = 0;
    for (const auto& p : paths) c.push_back({"t" + std::to_string(k++), p, std::nullopt, ""});
    return c;
}

const Edge* edge(const Grammar& g, const std::string& node, const std::string& child) {
    const Node* n = g.find(node);
    if (!n) return nullptr;
    for (const auto& e : n->children)
        if (e.id == child) return &e;
    return nullptr;
}

}  // namespace

TEST_CASE("build_initial_grammar") {
    SUBCASE("one distinct path") {
        const auto g = build_initial_grammar(corpus_of({{"a", "b"}, {"a", "b"}}), Layer::Spatial);
        const Node* root = g.find(g.start());
        REQUIRE(root);
        CHECK(root->kind == NodeKind::Or);
        REQUIRE(root->children.size() == 1);
        CHECK(root->children[0].p == doctest::Approx(1.0));
        const Node* p1 = g.find(root->children[0].id);
        REQUIRE(p1);
        CHECK(p1->kind == NodeKind::And);
        CHECK(p1->children == std::vector<Edge>{{"a", 1.0}, {"b", 1.0}});
    }
    SUBCASE("two equally frequent paths") {
        const auto g = build_initial_grammar(corpus_of({{"a", "b"}, {"c"}}), Layer::Spatial);
        const Node* root = g.find(g.start());
        REQUIRE(root->children.size() == 2);
        for (const auto& e : root->children) CHECK(e.p == doctest::Approx(0.5));
        CHECK(edge(g, g.start(), "c"));
        CHECK(validate(g).empty());
    }
    SUBCASE("paths derive with their empirical frequency") {
        const auto c = corpus_of({{"a", "b"}, {"a", "b"}, {"a", "b"}, {"b", "c", "a"}});
        const auto g = build_initial_grammar(c, Layer::Temporal);
        CHECK(oracle::path_probability(g, {"a", "b"}) == doctest::Approx(0.75));
        CHECK(oracle::path_probability(g, {"b", "c", "a"}) == doctest::Approx(0.25));
    }
    SUBCASE("errors") {
        CHECK_THROWS_WITH_AS(build_initial_grammar({}, Layer::Spatial), doctest::Contains("empty-corpus"), Error);
        CHECK_THROWS_AS(build_initial_grammar(corpus_of({{}}), Layer::Spatial), Error);
    }
}

TEST_CASE("enumerate_bigram_fragments") {
    const auto f = enumerate_bigram_fragments(corpus_of({{"USER", "CC", "CLOUD", "CC", "USER"}}));
    REQUIRE(f.size() == 4);
    CHECK(f[0].children == std::vector<std::string>{"CC", "CLOUD"});
    CHECK(f[1].children == std::vector<std::string>{"CC", "USER"});
    CHECK(f[2].children == std::vector<std::string>{"CLOUD", "CC"});
    CHECK(f[3].children == std::vector<std::string>{"USER", "CC"});
    for (const auto& x : f) CHECK(x.kind == NodeKind::And);
    CHECK(enumerate_bigram_fragments(corpus_of({{"a"}})).empty());
}

TEST_CASE("log_prior") {
    InductionConfig cfg;
    Grammar tunnel(Layer::Temporal, "Task", {"A1", "A2", "A3", "A4"},
                   {{"Task", NodeKind::And, {{"Enc"}, {"Route"}, {"Dec"}}},
                    {"Enc", NodeKind::And, {{"A3"}, {"A2"}}},
                    {"Route", NodeKind::And, {{"A3"}, {"A4"}}},
                    {"Dec", NodeKind::And, {{"A3"}, {"A1"}}}});
    CHECK(log_prior(tunnel, cfg) == -8.0);
    CHECK(log_prior(Grammar{}, cfg) == 0.0);
    cfg.alpha = 0.5;
    Grammar small(Layer::Spatial, "X", {"a", "b"}, {{"X", NodeKind::And, {{"a"}, {"b"}}}});
    CHECK(log_prior(small, cfg) - log_prior(tunnel, cfg) == doctest::Approx(5 * 0.5));
}

TEST_CASE("log_likelihood examples") {
    const auto c = corpus_of({{"a", "b"}, {"a", "b"}, {"c"}, {"c"}});
    CHECK(log_likelihood(build_initial_grammar(c, Layer::Spatial), c) == doctest::Approx(4 * std::log(0.5)));

    Grammar det(Layer::Spatial, "X", {"a", "b", "c"},
                {{"X", NodeKind::And, {{"Y"}, {"c"}}}, {"Y", NodeKind::And, {{"a"}, {"b"}}}});
    CHECK(log_likelihood(det, corpus_of({{"a", "b", "c"}})) == 0.0);
    CHECK(std::isinf(log_likelihood(det, corpus_of({{"a", "c"}}))));
}

TEST_CASE("log_likelihood matches derivation enumeration") {
    Rng rng(99);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = oracle::random_grammar(rng, 3, 6);
        const auto all = oracle::enumerate(g, g.start());
        REQUIRE(all.size() <= 1000);
        // Every derivable path plus one that is not.
        std::map<std::vector<std::string>, double> paths;
        for (const auto& d : all) paths[d.frontier] += d.probability;
        for (const auto& [path, p] : paths) {
            const double got = log_likelihood(g, corpus_of({path}));
            CHECK(std::abs(got - std::log(p)) <= 1e-12);
            ++checked;
        }
        CHECK(std::isinf(log_likelihood(g, corpus_of({{"a", "a", "a", "a", "a", "a", "a"}}))));
    }
    CHECK(checked > 200);
}

TEST_CASE("estimate_or_probabilities") {
    Grammar g(Layer::Spatial, "X", {"x", "y"}, {{"X", NodeKind::Or, {{"x", 0.5}, {"y", 0.5}}}});
    const auto est = estimate_or_probabilities(g, corpus_of({{"x"}, {"x"}, {"x"}, {"y"}}));
    CHECK(edge(est, "X", "x")->p == doctest::Approx(0.75));
    CHECK(edge(est, "X", "y")->p == doctest::Approx(0.25));
    CHECK(validate(est).empty());

    Grammar unused(Layer::Spatial, "X", {"a", "b", "c", "d"},
                   {{"X", NodeKind::Or, {{"a", 0.5}, {"Z", 0.5}}},
                    {"Z", NodeKind::Or, {{"b", 0.2}, {"c", 0.3}, {"d", 0.5}}}});
    const auto u = estimate_or_probabilities(unused, corpus_of({{"a"}}));
    for (const auto& e : u.find("Z")->children) CHECK(e.p == doctest::Approx(1.0 / 3.0));
    CHECK(validate(u).empty());

    CHECK_THROWS_WITH_AS(estimate_or_probabilities(g, corpus_of({{"q"}})), doctest::Contains("underivable-corpus"),
                         Error);
}

TEST_CASE("estimate_or_probabilities recovers sampled weights") {
    Grammar truth(Layer::Spatial, "S", {"a", "b", "c", "d", "e", "f"},
                  {{"S", NodeKind::Or, {{"P", 0.6}, {"Q", 0.4}}},
                   {"P", NodeKind::And, {{"a"}, {"X"}}},
                   {"Q", NodeKind::And, {{"d"}, {"Y"}}},
                   {"X", NodeKind::Or, {{"b", 0.3}, {"c", 0.7}}},
                   {"Y", NodeKind::Or, {{"e", 0.55}, {"f", 0.45}}}});
    Corpus samples;
    for (std::uint64_t s = 0; s < 1000; ++s) samples.push_back({"s", sample_derivation(truth, mix_seed(42, s)), {}, ""});
    // Start from uniform weights so the estimate owes nothing to the truth.
    std::vector<Node> flat;
    for (const auto& [id, n] : truth.nodes()) {
        Node m = n;
        if (m.kind == NodeKind::Or)
            for (auto& e : m.children) e.p = 1.0 / static_cast<double>(m.children.size());
        flat.push_back(m);
    }
    const auto est = estimate_or_probabilities(Grammar(Layer::Spatial, "S", truth.terminals(), flat), samples);
    for (const auto& [id, n] : truth.nodes()) {
        if (n.kind != NodeKind::Or) continue;
        for (const auto& e : n.children) CHECK(std::abs(edge(est, id, e.id)->p - e.p) <= 0.05);
    }
}

TEST_CASE("induce on a single repeated path") {
    const auto c = corpus_of({{"a", "b", "c"}, {"a", "b", "c"}, {"a", "b", "c"}});
    const auto r = induce(c, {}, Layer::Spatial);
    CHECK(log_likelihood(r.grammar, c) == doctest::Approx(0.0));
    for (std::size_t i = 1; i < r.log.size(); ++i) CHECK(r.log[i].log_posterior >= r.log[i - 1].log_posterior);
    CHECK(validate(r.grammar).empty());
}

TEST_CASE("induce merges differing continuations into an OR") {
    const auto c = corpus_of({{"a", "b", "c"}, {"a", "b", "d"}});
    const auto initial = build_initial_grammar(c, Layer::Spatial);
    const auto r = induce(c, {}, Layer::Spatial);
    CHECK(node_count(r.grammar) < node_count(initial));
    bool or_cd = false;
    for (const auto& [id, n] : r.grammar.nodes())
        if (n.kind == NodeKind::Or && n.children.size() == 2 && n.children[0].id == "c" && n.children[1].id == "d")
            or_cd = true;
    CHECK(or_cd);
    CHECK(log_likelihood(r.grammar, c) == doctest::Approx(2 * std::log(0.5)));
    REQUIRE(r.log.size() >= 2);
    CHECK(r.log[1].fragment == "or(c|d)@a b _");
}

TEST_CASE("induce invariants on random corpora") {
    Rng rng(5);
    const std::vector<std::string> alphabet = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<std::vector<std::string>> paths;
        const auto n = rng.uniform_int(1, 12);
        for (std::int64_t i = 0; i < n; ++i) {
            std::vector<std::string> p;
            const auto len = rng.uniform_int(1, 6);
            for (std::int64_t k = 0; k < len; ++k) p.push_back(alphabet[rng.uniform_int(0, 3)]);
            paths.push_back(p);
        }
        const auto c = corpus_of(paths);
        InductionConfig cfg;
        cfg.max_iterations = static_cast<int>(rng.uniform_int(1, 20));
        const auto r = induce(c, cfg, Layer::Spatial);
        CHECK(validate(r.grammar).empty());
        CHECK(std::isfinite(log_likelihood(r.grammar, c)));
        CHECK(r.log.size() <= static_cast<std::size_t>(cfg.max_iterations) + 1);
        CHECK(r.log.front().fragment == "init");
        for (std::size_t i = 1; i < r.log.size(); ++i) {
            CHECK(r.log[i].log_posterior >= r.log[i - 1].log_posterior);
            if (r.log[i].fragment != "-") CHECK(r.log[i].log_posterior - r.log[i - 1].log_posterior > cfg.min_posterior_gain);
        }
        CHECK(r.log.back().log_posterior == doctest::Approx(log_prior(r.grammar, cfg) + log_likelihood(r.grammar, c)));
        // Deterministic.
        CHECK(iteration_log_csv(induce(c, cfg, Layer::Spatial).log) == iteration_log_csv(r.log));
    }
}

TEST_CASE("induce rejects bad input") {
    CHECK_THROWS_WITH_AS(induce({}, {}, Layer::Spatial), doctest::Contains("empty-corpus"), Error);
    InductionConfig bad;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(induce(corpus_of({{"a"}}), bad, Layer::Spatial), Error);
}

TEST_CASE("iteration_log_csv") {
    const auto csv = iteration_log_csv({{0, "init", -3.0, -1.5, -4.5}, {1, "and(a,b)", -2.0, -1.5, -3.5}});
    CHECK(csv.rfind("iter,fragment,log_prior,log_likelihood,log_posterior\n", 0) == 0);
    CHECK(csv.find("0,init,-3,-1.5,-4.5\n") != std::string::npos);
    CHECK(csv.find("1,\"and(a,b)\",-2,-1.5,-3.5\n") != std::string::npos);
}

TEST_CASE("segment_hops") {
    const auto hops = segment_hops(corpus_of({{"USER", "RSU1", "WAN", "CLOUD", "WAN", "RSU2", "USER"}}));
    REQUIRE(hops.size() == 3);
    CHECK(hops[0].path == std::vector<std::string>{"RSU1", "WAN"});
    CHECK(hops[1].path == std::vector<std::string>{"CLOUD", "WAN"});
    CHECK(hops[2].path == std::vector<std::string>{"RSU2", "USER"});
    CHECK(hops[1].id == "t0#1");
    CHECK_THROWS_AS(segment_hops(corpus_of({{"USER"}})), Error);
}

TEST_CASE("spatial and temporal pipelines on a small corpus") {
    Corpus c;
    auto add = [&](std::vector<std::string> p, std::string op, int times) {
        for (int i = 0; i < times; ++i) c.push_back({"r" + std::to_string(c.size()), p, std::nullopt, op});
    };
    add({"USER", "CC", "CLOUD", "CC", "USER"}, "O_c", 4);
    add({"USER", "ES1", "USER"}, "O_e", 3);
    add({"USER", "ES2", "USER"}, "O_e", 3);

    const auto s = induce_spatial(c, {});
    CHECK(validate(s.grammar).empty());
    const auto& root = *s.grammar.find(s.grammar.start());
    for (const auto& e : root.children) CHECK(e.id.rfind("A", 0) == 0);
    CHECK(micro_action_of(s.grammar, {"ES1", "USER"}) == micro_action_of(s.grammar, {"ES2", "USER"}));

    const auto t = induce_temporal(c, s.grammar, {});
    CHECK(validate(t.grammar).empty());
    CHECK(t.grammar.contains("O_c"));
    CHECK(t.grammar.contains("O_e"));
    for (const auto& sym : t.grammar.terminals()) CHECK(s.grammar.find(sym));
}
