#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "stcaog/caog.hpp"
#include "stcaog/error.hpp"
#include "stcaog/fol.hpp"
#include "stcaog/fusion.hpp"
#include "stcaog/induction.hpp"
#include "stcaog/parsing.hpp"
#include "stcaog/simulator.hpp"

namespace stcaog::cli {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io-error", "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const std::string& path, const char* code) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(code, path + ": " + e.what());
    }
}

Corpus read_corpus(const std::string& path) {
    std::istringstream in(read_file(path));
    return corpus_from_jsonl(in);
}

// One invocation: declared inputs, parameters and pending outputs. Outputs
// are written only after the command finished, together with a manifest.
class Run {
public:
    Run(std::string command, bool force) : command_(std::move(command)), force_(force) {}

    void input(const std::string& path) { inputs_.push_back(path); }
    void param(const std::string& key, const std::string& value) { params_[key] = value; }

    void output(const std::string& path) {
        if (path.empty()) return;
        outputs_.push_back(path);
        if (!force_ && fs::exists(path))
            throw Error("output-exists", "'" + path + "' exists; pass --force to overwrite");
    }

    void set(const std::string& path, std::string bytes) { contents_[path] = std::move(bytes); }

    void commit(std::uint64_t seed) {
        std::uint64_t h = fnv1a(command_);
        for (const auto& [k, v] : params_) h = fnv1a(k + "=" + v + "\n", h);
        for (const auto& p : inputs_) h = fnv1a(read_file(p), fnv1a("\n", h));  // content, not location
        char digest[17];
        std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(h));
        nlohmann::json manifest = {{"command", command_},
                                   {"inputs", inputs_},
                                   {"outputs", outputs_},
                                   {"parameters", params_},
                                   {"seed", seed},
                                   {"digest", digest},
                                   {"version", STCAOG_VERSION}};
        const std::string manifest_path = outputs_.front() + ".manifest.json";
        if (!force_ && fs::exists(manifest_path))
            throw Error("output-exists", "'" + manifest_path + "' exists; pass --force to overwrite");
        for (const auto& p : outputs_) write(p, contents_.at(p));
        write(manifest_path, manifest.dump(2) + "\n");
    }

private:
    static void write(const std::string& path, const std::string& bytes) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
            throw Error("io-error", "cannot write '" + path + "'");
    }

    std::string command_;
    bool force_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
    std::map<std::string, std::string> params_;
    std::map<std::string, std::string> contents_;
};

struct Common {
    std::string out;
    std::string config;
    std::uint64_t seed = 42;
    bool force = false;
};

void add_common(CLI::App* app, Common& c, bool with_config) {
    app->add_option("--out", c.out, "Output file")->required();
    app->add_option("--seed", c.seed, "Random seed");
    app->add_flag("--force", c.force, "Overwrite existing outputs");
    if (with_config) app->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
}

std::string describe_text(const StcAog& aog, const std::vector<ParseGraph>& pgs) {
    if (pgs.empty()) return render_numbered(describe_aog(aog));
    std::string out;
    for (std::size_t i = 0; i < pgs.size(); ++i) {
        if (i) out += "\n";
        out += render_numbered(describe_pg(pgs[i], aog));
    }
    return out;
}

std::vector<ParseGraph> read_pgs(const std::string& path) {
    const auto text = read_file(path);
    std::vector<ParseGraph> out;
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.is_array())
            for (const auto& j : doc) out.push_back(parse_graph_from_json(j));
        else
            out.push_back(parse_graph_from_json(doc));
        return out;
    } catch (const nlohmann::json::exception&) {
    }
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_graph_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed-pg", path + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical network-language toolkit: grammar induction, fusion, parsing and logic views", "stcaog"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(STCAOG_VERSION));

    std::function<void()> action;
    Common common;

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate offloading traces with features");
    add_common(sim, common, true);
    std::optional<std::size_t> n_tasks;
    std::optional<std::string> policy;
    sim->add_option("--n-tasks", n_tasks, "Number of tasks");
    sim->add_option("--policy", policy, "stochastic, human-prior, intent-feature, O_c, O_r or O_e");
    sim->callback([&] {
        action = [&] {
            Run run("simulate", common.force);
            run.output(common.out);
            SimConfig cfg;
            if (!common.config.empty()) {
                run.input(common.config);
                cfg = sim_config_from_json(read_json(common.config, "invalid-config"));
            }
            if (sim->count("--seed")) cfg.seed = common.seed;
            if (n_tasks) cfg.n_tasks = *n_tasks;
            if (policy) cfg.policy = *policy;
            require_valid(cfg);
            run.param("config", to_json(cfg).dump());
            run.set(common.out, corpus_to_jsonl(simulate(cfg).traces));
            run.commit(cfg.seed);
        };
    });

    // induce
    auto* ind = app.add_subcommand("induce", "Learn the S or T grammar from traces");
    add_common(ind, common, false);
    std::string traces, layer, spatial, log_path;
    InductionConfig icfg;
    std::size_t origin_len = 1;
    ind->add_option("--traces", traces, "Trace JSONL")->required()->check(CLI::ExistingFile);
    ind->add_option("--layer", layer, "S or T")->required()->check(CLI::IsMember({"S", "T"}));
    ind->add_option("--spatial", spatial, "S grammar (required for --layer T)")->check(CLI::ExistingFile);
    ind->add_option("--log", log_path, "Iteration log CSV");
    ind->add_option("--alpha", icfg.alpha, "Prior weight per node");
    ind->add_option("--max-iterations", icfg.max_iterations, "Iteration cap");
    ind->add_option("--origin-len", origin_len, "Leading origin symbols per path");
    ind->callback([&] {
        if (layer == "T" && spatial.empty()) throw CLI::RequiredError("--spatial");
        action = [&] {
            Run run("induce", common.force);
            run.output(common.out);
            run.output(log_path);
            run.input(traces);
            icfg.seed = common.seed;
            require_valid(icfg);
            run.param("layer", layer);
            run.param("alpha", std::to_string(icfg.alpha));
            run.param("max_iterations", std::to_string(icfg.max_iterations));
            run.param("origin_len", std::to_string(origin_len));
            run.param("seed", std::to_string(icfg.seed));
            const Corpus corpus = read_corpus(traces);
            InductionResult result;
            if (layer == "S") {
                result = induce_spatial(corpus, icfg, origin_len);
            } else {
                run.input(spatial);
                const Grammar s = grammar_from_json(read_json(spatial, "malformed-grammar"));
                result = induce_temporal(corpus, s, icfg, origin_len);
            }
            run.set(common.out, to_json(result.grammar).dump(2) + "\n");
            if (!log_path.empty()) run.set(log_path, iteration_log_csv(result.log));
            run.commit(icfg.seed);
        };
    });

    // caog
    auto* cg = app.add_subcommand("caog", "Rank features against an intent and build the C grammar");
    add_common(cg, common, false);
    std::string dataset, intent = "F0", estimator = "mutual-information", scores_path;
    CaogConfig ccfg;
    auto* cg_traces = cg->add_option("--traces", traces, "Trace JSONL with features")->check(CLI::ExistingFile);
    auto* cg_data = cg->add_option("--dataset", dataset, "Feature CSV")->check(CLI::ExistingFile);
    cg_traces->excludes(cg_data);
    cg->add_option("--intent", intent, "Intent feature");
    cg->add_option("--estimator", estimator, "mutual-information or abs-correlation")
        ->check(CLI::IsMember({"mutual-information", "abs-correlation"}));
    cg->add_option("--top-k", ccfg.top_k, "Child features kept per level");
    cg->add_option("--threshold", ccfg.threshold, "Keep every feature scoring at least this");
    cg->add_option("--bins", ccfg.bins, "Bins for numeric features");
    cg->add_option("--depth", ccfg.max_depth, "Levels below the intent");
    cg->add_option("--scores", scores_path, "Relevance CSV");
    cg->callback([&] {
        if (traces.empty() == dataset.empty()) throw CLI::ValidationError("exactly one of --traces, --dataset");
        action = [&] {
            Run run("caog", common.force);
            run.output(common.out);
            run.output(scores_path);
            ccfg.estimator = parse_estimator(estimator);
            require_valid(ccfg);
            run.param("intent", intent);
            run.param("estimator", estimator);
            run.param("top_k", std::to_string(ccfg.top_k));
            run.param("threshold", ccfg.threshold ? std::to_string(*ccfg.threshold) : "none");
            run.param("bins", std::to_string(ccfg.bins));
            run.param("depth", std::to_string(ccfg.max_depth));
            Dataset data;
            if (!traces.empty()) {
                run.input(traces);
                for (const auto& t : read_corpus(traces)) {
                    if (!t.features) throw Error("incomplete-record", "trace '" + t.id + "' has no features");
                    data.push_back(*t.features);
                }
            } else {
                run.input(dataset);
                std::istringstream in(read_file(dataset));
                data = dataset_from_csv(in);
            }
            run.set(common.out, to_json(build_caog(data, intent, ccfg)).dump(2) + "\n");
            if (!scores_path.empty()) run.set(scores_path, relevance_csv(relevance_scores(data, intent, ccfg)));
            run.commit(common.seed);
        };
    });

    // fuse
    auto* fu = app.add_subcommand("fuse", "Join S, T and C grammars with cross-links");
    add_common(fu, common, false);
    std::string s_path, t_path, c_path;
    bool soft = false;
    fu->add_option("--s", s_path, "S grammar")->required()->check(CLI::ExistingFile);
    fu->add_option("--t", t_path, "T grammar")->required()->check(CLI::ExistingFile);
    fu->add_option("--c", c_path, "C grammar")->required()->check(CLI::ExistingFile);
    fu->add_option("--traces", traces, "Op-tagged trace JSONL with features")->required()->check(CLI::ExistingFile);
    fu->add_option("--origin-len", origin_len, "Leading origin symbols per path");
    fu->add_flag("--soft", soft, "Keep every observed link, not only the most frequent");
    fu->callback([&] {
        action = [&] {
            Run run("fuse", common.force);
            run.output(common.out);
            for (const auto* p : {&s_path, &t_path, &c_path, &traces}) run.input(*p);
            run.param("origin_len", std::to_string(origin_len));
            run.param("soft", soft ? "1" : "0");
            const Grammar s = grammar_from_json(read_json(s_path, "malformed-grammar"));
            const Grammar t = grammar_from_json(read_json(t_path, "malformed-grammar"));
            const Grammar c = grammar_from_json(read_json(c_path, "malformed-grammar"));
            const Corpus corpus = read_corpus(traces);
            std::vector<std::pair<std::string, FeatureRecord>> tagged;
            for (const auto& tr : corpus)
                if (tr.features) tagged.push_back({tr.op, *tr.features});
            const LinkOptions opts{soft};
            auto ts = link_s_to_t(s, t, annotate_micro_actions(s, corpus, origin_len), opts);
            auto ct = link_t_to_c(t, c, tagged, opts);
            const auto aog = fuse(s, t, c, std::move(ts), std::move(ct), origin_len);
            run.set(common.out, to_json(aog).dump(2) + "\n");
            run.commit(common.seed);
        };
    });

    // parse
    auto* pa = app.add_subcommand("parse", "Parse traces into parse graphs (JSON lines)");
    add_common(pa, common, false);
    std::string aog_path;
    pa->add_option("--aog", aog_path, "Composite grammar")->required()->check(CLI::ExistingFile);
    pa->add_option("--traces", traces, "Trace JSONL")->required()->check(CLI::ExistingFile);
    pa->callback([&] {
        action = [&] {
            Run run("parse", common.force);
            run.output(common.out);
            run.input(aog_path);
            run.input(traces);
            const auto aog = stc_from_json(read_json(aog_path, "malformed-aog"));
            std::string text;
            for (const auto& tr : read_corpus(traces)) text += to_json(viterbi_parse(aog, tr)).dump() + "\n";
            run.set(common.out, text);
            run.commit(common.seed);
        };
    });

    // describe
    auto* de = app.add_subcommand("describe", "First-order-logic view of a composite or parse graphs");
    add_common(de, common, false);
    std::string pg_path;
    de->add_option("--aog", aog_path, "Composite grammar")->required()->check(CLI::ExistingFile);
    de->add_option("--pg", pg_path, "Parse graph JSON or JSON lines")->check(CLI::ExistingFile);
    de->callback([&] {
        action = [&] {
            Run run("describe", common.force);
            run.output(common.out);
            run.input(aog_path);
            const auto aog = stc_from_json(read_json(aog_path, "malformed-aog"));
            std::vector<ParseGraph> pgs;
            if (!pg_path.empty()) {
                run.input(pg_path);
                pgs = read_pgs(pg_path);
            }
            run.set(common.out, describe_text(aog, pgs));
            run.commit(common.seed);
        };
    });

    // eval
    auto* ev = app.add_subcommand("eval", "Compare decision policies by windowed failure rate");
    add_common(ev, common, true);
    std::size_t episodes = 5000, window = 500;
    std::vector<std::string> policies = {"stochastic", "human-prior", "intent-feature"};
    std::string summary_path;
    ev->add_option("--episodes", episodes, "Evaluation tasks per policy");
    ev->add_option("--window", window, "Tasks per reported window");
    ev->add_option("--policies", policies, "Policies to compare")->delimiter(',');
    ev->add_option("--summary", summary_path, "Per-policy summary JSON");
    ev->callback([&] {
        action = [&] {
            Run run("eval", common.force);
            run.output(common.out);
            run.output(summary_path);
            SimConfig cfg;
            if (!common.config.empty()) {
                run.input(common.config);
                cfg = sim_config_from_json(read_json(common.config, "invalid-config"));
            }
            if (ev->count("--seed")) cfg.seed = common.seed;
            run.param("config", to_json(cfg).dump());
            run.param("episodes", std::to_string(episodes));
            run.param("window", std::to_string(window));
            std::string joined;
            for (const auto& p : policies) joined += p + ",";
            run.param("policies", joined);
            const auto result = run_policy_eval(cfg, policies, episodes, window);
            run.set(common.out, eval_csv(result.rows));
            if (!summary_path.empty()) {
                auto doc = nlohmann::json::array();
                for (const auto& s : result.summary)
                    doc.push_back({{"policy", s.policy}, {"failure_rate", s.failure_rate}, {"inputs", s.inputs}});
                run.set(summary_path, doc.dump(2) + "\n");
            }
            run.commit(cfg.seed);
        };
    });

    // export-dot
    auto* dot = app.add_subcommand("export-dot", "Graphviz rendering of a grammar or composite");
    add_common(dot, common, false);
    std::string grammar_path;
    auto* dot_aog = dot->add_option("--aog", aog_path, "Composite grammar")->check(CLI::ExistingFile);
    auto* dot_g = dot->add_option("--grammar", grammar_path, "Layer grammar")->check(CLI::ExistingFile);
    dot_aog->excludes(dot_g);
    dot->callback([&] {
        if (aog_path.empty() == grammar_path.empty()) throw CLI::ValidationError("exactly one of --aog, --grammar");
        action = [&] {
            Run run("export-dot", common.force);
            run.output(common.out);
            if (!aog_path.empty()) {
                run.input(aog_path);
                run.set(common.out, export_dot(stc_from_json(read_json(aog_path, "malformed-aog"))));
            } else {
                run.input(grammar_path);
                const Grammar g = grammar_from_json(read_json(grammar_path, "malformed-grammar"));
                require_valid(g);
                run.set(common.out, export_dot(g));
            }
            run.commit(common.seed);
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (action) action();
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace stcaog::cli
