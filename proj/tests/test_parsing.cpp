#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "fixtures.hpp"
#include "random_stc.hpp"
#include "stcaog/error.hpp"
#include "stcaog/parsing.hpp"

using namespace stcaog;
using namespace oracle;

namespace {

template <typename F>
std::string error_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

Trace worked_trace() { return {"worked", {"USER", "CC", "CLOUD", "CC", "USER"}, std::nullopt, "O_c"}; }

}  // namespace

TEST_CASE("viterbi_parse equals exhaustive search on random composites") {
    Rng rng(2024);
    int parsed = 0, rejected = 0;
    for (int round = 0; round < 200; ++round) {
        const auto aog = random_stc(rng);
        std::size_t n_or = 0;
        for (const Grammar* g : {&aog.s, &aog.t, &aog.c})
            for (const auto& [id, n] : g->nodes()) n_or += n.kind == NodeKind::Or;
        REQUIRE(n_or <= 8);

        const auto tr = sample_trace(aog, rng, round);
        const double expect = oracle_best(aog, tr);
        if (expect == kNegInf) {
            CHECK(error_code([&] { viterbi_parse(aog, tr); }) == "unparseable-trace");
            CHECK(error_code([&] { brute_force_parse(aog, tr); }) == "unparseable-trace");
            ++rejected;
            continue;
        }
        const auto v = viterbi_parse(aog, tr);
        const auto b = brute_force_parse(aog, tr);
        CHECK(v.log_likelihood == doctest::Approx(expect).epsilon(1e-12));
        CHECK(v.selections == b.selections);
        CHECK(v.links == b.links);
        CHECK(v.log_likelihood == doctest::Approx(b.log_likelihood).epsilon(1e-12));
        CHECK(parse_log_likelihood(v, aog) == doctest::Approx(v.log_likelihood).epsilon(1e-12));

        // The selected derivation spells the observed path.
        const std::vector<std::string> obs(tr.path.begin() + static_cast<long>(aog.origin_len), tr.path.end());
        CHECK(frontier(selected_derivation(v, aog, v.links.front().second)) == obs);
        ++parsed;
    }
    CHECK(parsed > 150);
    MESSAGE("parsed ", parsed, ", rejected ", rejected);
}

TEST_CASE("viterbi_parse: a composite without T/S Or nodes has one parse") {
    const Grammar s(Layer::Spatial, "P", {"x", "y"}, {{"P", NodeKind::And, {{"x", 1}, {"y", 1}}}});
    const Grammar t(Layer::Temporal, "O", {"a"}, {{"O", NodeKind::And, {{"a", 1}, {"a", 1}}}});
    const Grammar c(Layer::Causal, "F", {"v"}, {{"F", NodeKind::Or, {{"v", 1.0}}}});
    const auto aog = fuse(s, t, c, {{"a", "P", 1.0}}, {{"v", "O", 1.0}});
    const Trace tr{"one", {"x", "y", "x", "y"}, std::nullopt, ""};
    const auto pg = viterbi_parse(aog, tr);
    CHECK(pg.log_likelihood == 0.0);
    CHECK(pg.selections == std::map<std::string, std::string>{{"F", "v"}});
    CHECK(pg.links == std::vector<std::pair<std::string, std::string>>{{"v", "O"}});
    CHECK(pg == brute_force_parse(aog, tr));
    CHECK(error_code([&] { viterbi_parse(aog, {"odd", {"x", "y", "x"}, std::nullopt, ""}); }) == "unparseable-trace");
}

TEST_CASE("viterbi_parse: the offloading example") {
    const auto aog = load_stc("case_study");
    const auto pg = viterbi_parse(aog, worked_trace());
    CHECK(pg.links == std::vector<std::pair<std::string, std::string>>{{"V_c", "O_c"}});
    CHECK(pg.selections.at("F1") == "V_c");
    CHECK(pg.selections.count("F2") == 0);
    CHECK(pg.selections.at("T_ROOT") == "O_c");
    CHECK(pg.selections.at("BACK") == "CC");
    const double expect = std::log(0.667) + std::log(0.5) + std::log(0.334) + std::log(0.5);
    CHECK(pg.log_likelihood == doctest::Approx(expect).epsilon(1e-12));
    CHECK(pg == brute_force_parse(aog, worked_trace()));
}

TEST_CASE("viterbi_parse: evidence pins the C layer") {
    const auto aog = load_stc("case_study");
    Trace tr = worked_trace();
    tr.features = FeatureRecord{{"F2", 42.0}};
    const auto pg = viterbi_parse(aog, tr);
    CHECK(pg.selections.at("F2") == "F2:10..150");
    CHECK(pg.log_likelihood == doctest::Approx(viterbi_parse(aog, worked_trace()).log_likelihood + std::log(0.5)));
    // Evidence contradicting every link leaves nothing to parse.
    tr.features = FeatureRecord{{"F1", std::string("V_e")}};
    CHECK(error_code([&] { viterbi_parse(aog, tr); }) == "unparseable-trace");
    tr.features = FeatureRecord{{"F1", std::string("V_x")}};
    CHECK(error_code([&] { viterbi_parse(aog, tr); }) == "unparseable-trace");
}

TEST_CASE("parse errors") {
    const auto aog = load_stc("case_study");
    CHECK(error_code([&] { viterbi_parse(aog, {"u", {"USER", "CC", "MOON"}, std::nullopt, ""}); }) ==
          "unparseable-trace");
    CHECK(error_code([&] { viterbi_parse(aog, {"e", {"USER"}, std::nullopt, ""}); }) == "unparseable-trace");
    CHECK(error_code([&] { brute_force_parse(aog, worked_trace(), 1); }) == "combinatorial-cap-exceeded");
}

TEST_CASE("ParseGraph JSON round trip") {
    const auto aog = load_stc("case_study");
    const auto pg = viterbi_parse(aog, worked_trace());
    const auto back = parse_graph_from_json(to_json(pg));
    CHECK(back == pg);
    CHECK(error_code([] { parse_graph_from_json(nlohmann::json::parse("[1, 2]")); }) == "malformed-pg");
}
