// Python extension. Structured values cross the boundary as JSON text; the
// stcaog package turns them into dicts and lists.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "stcaog/caog.hpp"
#include "stcaog/error.hpp"
#include "stcaog/fol.hpp"
#include "stcaog/fusion.hpp"
#include "stcaog/induction.hpp"
#include "stcaog/parsing.hpp"
#include "stcaog/simulator.hpp"

namespace py = pybind11;
using namespace stcaog;
using nlohmann::json;

namespace {

json parse_json(const std::string& text, const char* code) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(code, e.what());
    }
}

Corpus corpus_of(const std::string& jsonl) {
    std::istringstream in(jsonl);
    return corpus_from_jsonl(in);
}

Dataset dataset_of(const Corpus& corpus) {
    Dataset data;
    for (const auto& t : corpus) {
        if (!t.features) throw Error("incomplete-record", "trace '" + t.id + "' has no features");
        data.push_back(*t.features);
    }
    return data;
}

Grammar grammar_of(const std::string& text) { return grammar_from_json(parse_json(text, "malformed-grammar")); }
StcAog aog_of(const std::string& text) { return stc_from_json(parse_json(text, "malformed-aog")); }

SimConfig config_of(const std::string& text) {
    return text.empty() ? SimConfig{} : sim_config_from_json(parse_json(text, "invalid-config"));
}

std::string simulate_jsonl(const std::string& config) { return corpus_to_jsonl(simulate(config_of(config)).traces); }

std::string default_config() { return to_json(SimConfig{}).dump(); }

std::string induce_json(const std::string& traces, const std::string& layer, const std::string& spatial,
                        double alpha, int max_iterations, std::size_t origin_len, std::uint64_t seed) {
    InductionConfig cfg;
    cfg.alpha = alpha;
    cfg.max_iterations = max_iterations;
    cfg.seed = seed;
    require_valid(cfg);
    const Corpus corpus = corpus_of(traces);
    InductionResult r;
    if (layer == "S")
        r = induce_spatial(corpus, cfg, origin_len);
    else if (layer == "T")
        r = induce_temporal(corpus, grammar_of(spatial), cfg, origin_len);
    else
        throw Error("invalid-config", "layer must be S or T");
    json log = json::array();
    for (const auto& row : r.log)
        log.push_back({{"iteration", row.iteration},
                       {"fragment", row.fragment},
                       {"log_prior", row.log_prior},
                       {"log_likelihood", row.log_likelihood},
                       {"log_posterior", row.log_posterior}});
    return json{{"grammar", to_json(r.grammar)}, {"log", log}, {"fragment_count", r.fragment_count}}.dump();
}

CaogConfig caog_config(const std::string& estimator, int top_k, int bins, int depth) {
    CaogConfig cfg;
    cfg.estimator = parse_estimator(estimator);
    cfg.top_k = top_k;
    cfg.bins = bins;
    cfg.max_depth = depth;
    require_valid(cfg);
    return cfg;
}

std::vector<std::pair<std::string, double>> relevance(const std::string& traces, const std::string& intent,
                                                      const std::string& estimator) {
    return relevance_scores(dataset_of(corpus_of(traces)), intent, caog_config(estimator, 2, 4, 1)).ranked();
}

std::string caog_json(const std::string& traces, const std::string& intent, const std::string& estimator, int top_k,
                      int bins, int depth) {
    return to_json(build_caog(dataset_of(corpus_of(traces)), intent, caog_config(estimator, top_k, bins, depth)))
        .dump();
}

std::string fuse_json(const std::string& s_text, const std::string& t_text, const std::string& c_text,
                      const std::string& traces, std::size_t origin_len, bool soft) {
    const Grammar s = grammar_of(s_text), t = grammar_of(t_text), c = grammar_of(c_text);
    const Corpus corpus = corpus_of(traces);
    std::vector<std::pair<std::string, FeatureRecord>> tagged;
    for (const auto& tr : corpus)
        if (tr.features) tagged.push_back({tr.op, *tr.features});
    const LinkOptions opts{soft};
    auto ts = link_s_to_t(s, t, annotate_micro_actions(s, corpus, origin_len), opts);
    auto ct = link_t_to_c(t, c, tagged, opts);
    return to_json(fuse(s, t, c, std::move(ts), std::move(ct), origin_len)).dump();
}

std::string parse_json_pg(const std::string& aog, const std::string& trace) {
    return to_json(viterbi_parse(aog_of(aog), trace_from_json(parse_json(trace, "malformed-corpus")))).dump();
}

std::string describe(const std::string& aog_text, const std::string& pg) {
    const StcAog aog = aog_of(aog_text);
    if (pg.empty()) return render_numbered(describe_aog(aog));
    return render_numbered(describe_pg(parse_graph_from_json(parse_json(pg, "malformed-pg")), aog));
}

std::string dot(const std::string& text) {
    const json doc = parse_json(text, "malformed-aog");
    if (doc.is_object() && doc.contains("links_ts")) return export_dot(stc_from_json(doc));
    return export_dot(grammar_from_json(doc));
}

std::vector<std::string> sample(const std::string& grammar, std::uint64_t seed) {
    return sample_derivation(grammar_of(grammar), seed);
}

std::string evaluate(const std::string& config, const std::vector<std::string>& policies, std::size_t episodes,
                     std::size_t window) {
    const auto r = run_policy_eval(config_of(config), policies, episodes, window);
    json summary = json::array();
    for (const auto& s : r.summary)
        summary.push_back({{"policy", s.policy}, {"failure_rate", s.failure_rate}, {"inputs", s.inputs}});
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"episode", row.episode}, {"policy", row.policy}, {"failure_rate", row.failure_rate}});
    return json{{"summary", summary}, {"rows", rows}}.dump();
}

}  // namespace

PYBIND11_MODULE(_stcaog, m) {
    m.doc() = "Native core of the stcaog package";
    m.attr("__version__") = STCAOG_VERSION;

    static py::handle error_type = py::exception<Error>(m, "StcaogError", PyExc_ValueError).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
            inst.attr("code") = e.code();
            PyErr_SetObject(error_type.ptr(), inst.ptr());
        }
    });

    m.def("default_config", &default_config);
    m.def("simulate", &simulate_jsonl, py::arg("config"));
    m.def("induce", &induce_json, py::arg("traces"), py::arg("layer"), py::arg("spatial"), py::arg("alpha"),
          py::arg("max_iterations"), py::arg("origin_len"), py::arg("seed"));
    m.def("relevance", &relevance, py::arg("traces"), py::arg("intent"), py::arg("estimator"));
    m.def("build_caog", &caog_json, py::arg("traces"), py::arg("intent"), py::arg("estimator"), py::arg("top_k"),
          py::arg("bins"), py::arg("depth"));
    m.def("fuse", &fuse_json, py::arg("s"), py::arg("t"), py::arg("c"), py::arg("traces"), py::arg("origin_len"),
          py::arg("soft"));
    m.def("parse", &parse_json_pg, py::arg("aog"), py::arg("trace"));
    m.def("describe", &describe, py::arg("aog"), py::arg("pg"));
    m.def("export_dot", &dot, py::arg("doc"));
    m.def("sample", &sample, py::arg("grammar"), py::arg("seed"));
    m.def("evaluate", &evaluate, py::arg("config"), py::arg("policies"), py::arg("episodes"), py::arg("window"));
}
