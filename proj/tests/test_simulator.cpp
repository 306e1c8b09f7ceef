#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "stcaog/caog.hpp"
#include "stcaog/error.hpp"
#include "stcaog/fusion.hpp"
#include "stcaog/induction.hpp"
#include "stcaog/parsing.hpp"
#include "stcaog/rng.hpp"
#include "stcaog/simulator.hpp"

using namespace stcaog;

namespace {

SimConfig small(std::size_t n, std::uint64_t seed = 42) {
    SimConfig c;
    c.n_tasks = n;
    c.seed = seed;
    c.training_tasks = 2000;
    return c;
}

bool contains(const std::vector<std::string>& path, std::string_view prefix) {
    return std::any_of(path.begin(), path.end(), [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
}

const std::string& text(const Trace& t, const char* f) { return std::get<std::string>(t.features->at(f)); }

template <typename F>
std::string error_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("the shipped config file holds the built-in defaults") {
    const auto doc = nlohmann::json::parse(read_text("data/default_sim_config.json"));
    CHECK(doc == to_json(SimConfig{}));
    CHECK(to_json(sim_config_from_json(doc)) == doc);
}

TEST_CASE("config validation") {
    CHECK(error_code([] { sim_config_from_json(nlohmann::json::parse(R"({"bogus": 1})")); }) == "invalid-config");
    CHECK(error_code([] { sim_config_from_json(nlohmann::json::parse(R"({"drop_edge": 1.5})")); }) ==
          "invalid-config");
    CHECK(error_code([] { sim_config_from_json(nlohmann::json::parse(R"({"wan_up": {"median": 0, "sigma": 1}})")); }) ==
          "invalid-config");
    CHECK(error_code([] { sim_config_from_json(nlohmann::json::parse(R"({"policy": "oracle"})")); }) ==
          "invalid-config");
    CHECK(error_code([] { sim_config_from_json(nlohmann::json::parse(R"({"n_tasks": "many"})")); }) ==
          "invalid-config");
    CHECK(error_code([] { sim_config_from_json(nlohmann::json::parse("[]")); }) == "invalid-config");
    CHECK(sim_config_from_json(nlohmann::json::parse(R"({"seed": 7})")).seed == 7);
}

TEST_CASE("topology: the three offload routes are connected") {
    const auto topo = default_topology(3, 5);
    CHECK(topo.connected({"USER", "ES2", "USER"}));
    CHECK(topo.connected({"USER", "RSU1", "WAN", "CLOUD", "WAN", "RSU3", "USER"}));
    CHECK(topo.connected({"USER", "BS", "CC", "CLOUD", "CC", "BS", "USER"}));
    CHECK_FALSE(topo.connected({"USER", "CLOUD"}));
    CHECK(topo.probe_symbols({"USER", "BS", "CC", "CLOUD", "CC", "BS", "USER"}) ==
          std::vector<std::string>{"USER", "CC", "CLOUD", "CC", "USER"});
}

TEST_CASE("simulate: a forced cellular policy only produces the cellular route") {
    SimConfig c = small(300);
    c.policy = "O_c";
    for (const auto& t : simulate(c).traces) {
        CHECK(t.path == std::vector<std::string>{"USER", "CC", "CLOUD", "CC", "USER"});
        CHECK(text(t, "F1") == "V_c");
        CHECK(t.op == "O_c");
    }
}

TEST_CASE("simulate: zero tasks") { CHECK(simulate(small(0)).traces.empty()); }

TEST_CASE("simulate: identical configs give identical output") {
    const auto a = corpus_to_jsonl(simulate(small(500, 9)).traces);
    const auto b = corpus_to_jsonl(simulate(small(500, 9)).traces);
    CHECK(a == b);
    CHECK(a != corpus_to_jsonl(simulate(small(500, 10)).traces));
    std::istringstream in(a);
    CHECK(corpus_to_jsonl(corpus_from_jsonl(in)) == a);
}

TEST_CASE("simulate: traces agree with their operation tags and features") {
    const auto out = simulate(SimConfig{});
    REQUIRE(out.traces.size() == 10000);
    for (const auto& t : out.traces) {
        const bool es = contains(t.path, "ES"), rsu = contains(t.path, "RSU"), cc = contains(t.path, "CC");
        CHECK(es == (t.op == "O_e"));
        CHECK((rsu && contains(t.path, "WAN")) == (t.op == "O_r"));
        CHECK(cc == (t.op == "O_c"));
        CHECK((text(t, "F1") == "V_e") == (t.op == "O_e"));
        CHECK((text(t, "F0") == "success" || text(t, "F0") == "failure"));
        CHECK(t.features->size() == 18);
    }
}

TEST_CASE("simulate: the default corpus has 28 adjacent probe pairs") {
    CHECK(enumerate_bigram_fragments(simulate(SimConfig{}).traces).size() == 28);
}

TEST_CASE("simulate: the intent depends on route class and service time") {
    const auto out = simulate(SimConfig{});
    Dataset d;
    for (const auto& t : out.traces) d.push_back(*t.features);
    CaogConfig cfg;
    const auto observed = relevance_scores(d, "F0", cfg);
    auto score = [](const RelevanceScores& r, const std::string& f) {
        for (const auto& [id, s] : r.scores)
            if (id == f) return s;
        return -1.0;
    };
    // Permutation baseline: shuffle the intent column 100 times.
    Rng rng(5);
    double max_f1 = 0, max_f2 = 0;
    for (int round = 0; round < 100; ++round) {
        Dataset shuffled = d;
        for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
            std::swap(shuffled[i]["F0"], shuffled[j]["F0"]);
        }
        Dataset cols;
        for (const auto& r : shuffled) cols.push_back({{"F0", r.at("F0")}, {"F1", r.at("F1")}, {"F2", r.at("F2")}});
        const auto s = relevance_scores(cols, "F0", cfg);
        max_f1 = std::max(max_f1, score(s, "F1"));
        max_f2 = std::max(max_f2, score(s, "F2"));
    }
    CHECK(score(observed, "F1") > max_f1);
    CHECK(score(observed, "F2") > max_f2);
}

TEST_CASE("simulate: every path parses under the composite learned from its corpus") {
    SimConfig c = small(3000, 11);
    const auto corpus = simulate(c).traces;
    const InductionConfig ic;
    const auto s = induce_spatial(corpus, ic, 1).grammar;
    const auto t = induce_temporal(corpus, s, ic, 1).grammar;
    Dataset d;
    std::vector<std::pair<std::string, FeatureRecord>> tagged;
    for (const auto& tr : corpus) {
        d.push_back(*tr.features);
        tagged.push_back({tr.op, *tr.features});
    }
    const auto cg = build_caog(d, "F0", CaogConfig{});
    const auto links_ts = link_s_to_t(s, t, annotate_micro_actions(s, corpus, 1));
    const auto links_ct = link_t_to_c(t, cg, tagged);
    const auto aog = fuse(s, t, cg, links_ts, links_ct, 1);
    std::size_t parsed = 0;
    for (const auto& tr : corpus) {
        const auto pg = viterbi_parse(aog, tr);
        CHECK(std::isfinite(pg.log_likelihood));
        CHECK(pg.links.front().second == tr.op);
        ++parsed;
    }
    CHECK(parsed == corpus.size());
}

TEST_CASE("run_policy_eval: the stochastic policy is required") {
    CHECK(error_code([] { run_policy_eval(small(10), {"human-prior"}, 10, 5); }) == "missing-stochastic-policy");
}

TEST_CASE("run_policy_eval: windowed rows and CSV") {
    const auto r = run_policy_eval(small(10), {"stochastic", "O_e"}, 25, 10);
    REQUIRE(r.rows.size() == 6);
    CHECK(r.rows[0].episode == 10);
    CHECK(r.rows[2].episode == 25);
    CHECK(r.rows[3].policy == "O_e");
    const auto csv = eval_csv(r.rows);
    CHECK(csv.rfind("episode,policy,failure_rate\n10,stochastic,", 0) == 0);
    double weighted = 0;
    for (int k = 0; k < 3; ++k) weighted += r.rows[k].failure_rate * (k == 2 ? 5 : 10);
    CHECK(weighted / 25 == doctest::Approx(r.summary[0].failure_rate));
}

TEST_CASE("run_policy_eval: routes of identical cost leave nothing to learn") {
    std::vector<double> diff_h, diff_i;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig c = small(0, seed);
        c.deadline_ms = 1e9;
        c.drop_edge = c.drop_rsu = c.drop_cellular = 0.1;
        const auto r = run_policy_eval(c, {"stochastic", "human-prior", "intent-feature"}, 1000, 1000);
        diff_h.push_back(r.summary[1].failure_rate - r.summary[0].failure_rate);
        diff_i.push_back(r.summary[2].failure_rate - r.summary[0].failure_rate);
    }
    for (const auto* diffs : {&diff_h, &diff_i}) {
        const double m = mean(*diffs);
        double var = 0;
        for (double x : *diffs) var += (x - m) * (x - m);
        const double se = std::sqrt(var / (diffs->size() - 1) / diffs->size());
        CHECK(std::abs(m) <= 2 * se + 1e-12);
    }
}

TEST_CASE("run_policy_eval: a longer deadline never raises failure rates") {
    const std::vector<std::string> policies = {"stochastic", "human-prior", "intent-feature"};
    std::vector<std::vector<double>> base(3), doubled(3);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SimConfig c = small(0, seed);
        const auto a = run_policy_eval(c, policies, 2000, 2000);
        c.deadline_ms *= 2;
        const auto b = run_policy_eval(c, policies, 2000, 2000);
        for (int k = 0; k < 3; ++k) {
            base[k].push_back(a.summary[k].failure_rate);
            doubled[k].push_back(b.summary[k].failure_rate);
        }
        // Same tasks and same choices for the untrained policy: pointwise.
        CHECK(b.summary[0].failure_rate <= a.summary[0].failure_rate);
    }
    for (int k = 0; k < 3; ++k) CHECK(mean(doubled[k]) <= mean(base[k]));
}
