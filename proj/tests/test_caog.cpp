#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stcaog/caog.hpp"
#include "stcaog/error.hpp"
#include "stcaog/rng.hpp"

using namespace stcaog;

namespace {

// F0 is decided by the route class F1 and the service time F2; F3 is noise.
Dataset offload_like(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        const bool cloud = rng.bernoulli(0.6);
        const double time = cloud ? rng.lognormal(180.0, 0.4) : rng.lognormal(90.0, 0.4);
        const bool ok = time < 200.0 && rng.bernoulli(cloud ? 0.95 : 0.7);
        FeatureRecord r;
        r["F0"] = std::string(ok ? "success" : "failure");
        r["F1"] = std::string(cloud ? "V_c" : "V_e");
        r["F2"] = time;
        r["F3"] = rng.uniform();
        d.push_back(std::move(r));
    }
    return d;
}

// Plug-in mutual information over already-discrete codes, with plain arrays.
double oracle_mi(const std::vector<int>& x, const std::vector<int>& y, int kx, int ky) {
    std::vector<double> j(static_cast<std::size_t>(kx * ky), 0.0), px(kx, 0.0), py(ky, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        j[static_cast<std::size_t>(x[i] * ky + y[i])] += 1;
        px[x[i]] += 1;
        py[y[i]] += 1;
    }
    const double n = static_cast<double>(x.size());
    double mi = 0;
    for (int a = 0; a < kx; ++a)
        for (int b = 0; b < ky; ++b) {
            const double c = j[static_cast<std::size_t>(a * ky + b)];
            if (c > 0) mi += c / n * std::log(c * n / (px[a] * py[b]));
        }
    return mi;
}

double score_of(const RelevanceScores& s, const std::string& f) {
    for (const auto& [id, v] : s.scores)
        if (id == f) return v;
    return -1.0;
}

}  // namespace

TEST_CASE("relevance: an exact copy of the intent scores highest") {
    Rng rng(3);
    Dataset d;
    for (int i = 0; i < 200; ++i) {
        const bool y = rng.bernoulli(0.4);
        d.push_back({{"F0", std::string(y ? "success" : "failure")},
                     {"F1", std::string(y ? "a" : "b")},
                     {"F2", rng.uniform()},
                     {"F3", y ? 1.0 + 0.5 * rng.uniform() : rng.uniform()}});
    }
    for (auto est : {Estimator::AbsCorrelation, Estimator::MutualInformation}) {
        CaogConfig cfg;
        cfg.estimator = est;
        const auto s = relevance_scores(d, "F0", cfg);
        CHECK(s.ranked().front().first == "F1");
        CHECK(s.scores.size() == 3);
        CHECK(s.consistency >= 0.95);
        CHECK(s.consistency <= 1.0);
        for (const auto& [f, v] : s.scores) CHECK(std::isfinite(v));
    }
}

TEST_CASE("relevance: independent noise has small mutual information") {
    Rng rng(11);
    Dataset d;
    for (int i = 0; i < 10000; ++i)
        d.push_back({{"F0", std::string(rng.bernoulli(0.5) ? "success" : "failure")}, {"F1", rng.uniform(0, 100)}});
    const auto s = relevance_scores(d, "F0", {});
    CHECK(score_of(s, "F1") < 0.1);
}

TEST_CASE("relevance: mutual information matches an array oracle") {
    const auto d = offload_like(500, 8);
    CaogConfig cfg;
    cfg.bins = 3;
    const auto s = relevance_scores(d, "F0", cfg);
    const auto x = discretize_feature(d, "F2", 3);
    std::vector<int> xs, ys, cs;
    for (const auto& r : d) {
        xs.push_back(static_cast<int>(x.index_of(r.at("F2"))));
        ys.push_back(std::get<std::string>(r.at("F0")) == "success");
        cs.push_back(std::get<std::string>(r.at("F1")) == "V_c");
    }
    CHECK(score_of(s, "F2") == doctest::Approx(oracle_mi(xs, ys, static_cast<int>(x.symbols.size()), 2)).epsilon(1e-12));
    CHECK(score_of(s, "F1") == doctest::Approx(oracle_mi(cs, ys, 2, 2)).epsilon(1e-12));
}

TEST_CASE("relevance: errors") {
    const auto d = offload_like(20, 1);
    CHECK_THROWS_WITH_AS(relevance_scores(d, "F0", {}), doctest::Contains("insufficient-data"), Error);
    auto c = offload_like(40, 1);
    for (auto& r : c) r["F0"] = std::string("success");
    CHECK_THROWS_WITH_AS(relevance_scores(c, "F0", {}), doctest::Contains("constant-intent"), Error);
}

TEST_CASE("relevance: relabeling and scaling") {
    const auto d = offload_like(600, 21);
    Dataset renamed, scaled;
    for (const auto& r : d) {
        renamed.push_back({{"F0", r.at("F0")}, {"F9", r.at("F1")}, {"F7", r.at("F2")}, {"F5", r.at("F3")}});
        auto s = r;
        s["F2"] = std::get<double>(r.at("F2")) * 37.5;
        scaled.push_back(std::move(s));
    }
    for (auto est : {Estimator::AbsCorrelation, Estimator::MutualInformation}) {
        CaogConfig cfg;
        cfg.estimator = est;
        std::vector<double> a, b;
        for (const auto& [f, v] : relevance_scores(d, "F0", cfg).scores) a.push_back(v);
        for (const auto& [f, v] : relevance_scores(renamed, "F0", cfg).scores) b.push_back(v);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
    CHECK(score_of(relevance_scores(d, "F0", {}), "F2") == score_of(relevance_scores(scaled, "F0", {}), "F2"));
}

TEST_CASE("discretize_feature") {
    SUBCASE("categorical") {
        Dataset d = {{{"F1", std::string("V_e")}}, {{"F1", std::string("V_c")}}, {{"F1", std::string("V_c")}}};
        const auto x = discretize_feature(d, "F1", 4);
        CHECK(x.categorical);
        CHECK(x.symbols == std::vector<std::string>{"V_c", "V_e"});
    }
    SUBCASE("equal frequency") {
        Dataset d = {{{"F2", 4.0}}, {{"F2", 1.0}}, {{"F2", 3.0}}, {{"F2", 2.0}}};
        const auto x = discretize_feature(d, "F2", 2);
        CHECK(x.cuts == std::vector<double>{2.5});
        CHECK(x.symbols == std::vector<std::string>{"F2:1..2.5", "F2:2.5..4"});
        CHECK(x.symbol_of(2.0) == "F2:1..2.5");
        CHECK(x.symbol_of(2.5) == "F2:2.5..4");
        CHECK(x.symbol_of(4.0) == "F2:2.5..4");
        CHECK_FALSE(x.constant);
    }
    SUBCASE("constant") {
        Dataset d = {{{"F5", 5.0}}, {{"F5", 5.0}}, {{"F5", 5.0}}};
        const auto x = discretize_feature(d, "F5", 3);
        CHECK(x.constant);
        CHECK(x.symbols == std::vector<std::string>{"5"});
    }
    SUBCASE("ties never create empty ranges") {
        Dataset d;
        for (int i = 0; i < 10; ++i) d.push_back({{"F3", i < 8 ? 0.0 : 1.0}});
        const auto x = discretize_feature(d, "F3", 4);
        CHECK(x.symbols.size() == 2);
    }
}

TEST_CASE("build_caog") {
    const auto d = offload_like(2000, 5);
    CaogConfig cfg;
    const auto g = build_caog(d, "F0", cfg);
    CHECK(validate(g).empty());
    CHECK(g.layer() == Layer::Causal);
    const Node* root = g.find("F0");
    REQUIRE(root);
    CHECK(root->kind == NodeKind::And);
    REQUIRE(root->children.size() == 2);
    std::vector<std::string> kids = {root->children[0].id, root->children[1].id};
    std::sort(kids.begin(), kids.end());
    CHECK(kids == std::vector<std::string>{"F1", "F2"});

    const Node* f1 = g.find("F1");
    REQUIRE(f1);
    CHECK(f1->kind == NodeKind::Or);
    double vc = 0;
    for (const auto& r : d) vc += std::get<std::string>(r.at("F1")) == "V_c";
    REQUIRE(f1->children.size() == 2);
    CHECK(f1->children[0].id == "V_c");
    CHECK(std::abs(f1->children[0].p - vc / 2000.0) <= 1e-12);
    CHECK(std::abs(f1->children[1].p - (2000.0 - vc) / 2000.0) <= 1e-12);

    CHECK(to_json(build_caog(d, "F0", cfg)).dump() == to_json(g).dump());

    cfg.top_k = 1;
    const auto chain = build_caog(d, "F0", cfg);
    CHECK(validate(chain).empty());
    CHECK(chain.find("F0")->children.size() == 1);

    cfg.top_k = 2;
    cfg.max_depth = 2;
    const auto deep = build_caog(d, "F0", cfg);
    CHECK(validate(deep).empty());
    CHECK(deep.nodes().size() > g.nodes().size());
}

TEST_CASE("dataset csv round trip") {
    const auto d = offload_like(50, 2);
    std::istringstream in(dataset_to_csv(d));
    const auto back = dataset_from_csv(in);
    REQUIRE(back.size() == d.size());
    CHECK(back == d);
    std::istringstream bad("F0,F1\nsuccess\n");
    CHECK_THROWS_AS(dataset_from_csv(bad), Error);
}

TEST_CASE("relevance csv") {
    RelevanceScores s;
    s.scores = {{"F1", 0.2}, {"F2", 0.5}, {"F10", 0.2}};
    CHECK(relevance_csv(s) == "feature,score,rank\nF2,0.5,1\nF1,0.20000000000000001,2\nF10,0.20000000000000001,3\n");
}
