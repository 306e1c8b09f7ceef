#include "stcaog/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>

#include "stcaog/caog.hpp"
#include "stcaog/error.hpp"
#include "stcaog/rng.hpp"

namespace stcaog {

namespace {

constexpr std::uint64_t kTrainingStream = 0x7472616996e;  // independent of task indices
constexpr std::uint64_t kEvalStream = 0x6576616c;

enum Op { ViaCellular = 0, ViaRsu = 1, ToEdge = 2 };

Op op_index(const std::string& op) {
    for (std::size_t k = 0; k < kOperations.size(); ++k)
        if (op == kOperations[k]) return static_cast<Op>(k);
    throw Error("invalid-config", "unknown operation '" + op + "'");
}

std::string numbered(const char* prefix, int k) { return prefix + std::to_string(k); }

// Every random quantity of one task, drawn in a fixed order so that the
// stream does not depend on the policy.
struct Draws {
    std::int64_t location = 0;
    std::int64_t file_kb = 0, result_kb = 0, instructions = 0;
    std::array<double, 6> observed{};  // wan up/down, cell up/down, wlan up/down
    std::array<double, 6> noise{};
    double edge_util_noise = 0.0, cloud_util_noise = 0.0;
    double drop_u = 0.0;
    std::int64_t return_rsu = 0;
    std::int64_t stochastic_choice = 0;
};

Draws draw(const SimConfig& c, std::uint64_t stream) {
    Rng rng(stream);
    Draws d;
    d.location = rng.uniform_int(0, c.n_locations - 1);
    d.file_kb = rng.uniform_int(c.file_kb.lo, c.file_kb.hi);
    d.result_kb = rng.uniform_int(c.result_kb.lo, c.result_kb.hi);
    d.instructions = rng.uniform_int(c.instructions.lo, c.instructions.hi);
    const LogNormalParam* links[6] = {&c.wan_up, &c.wan_down, &c.cell_up, &c.cell_down, &c.wlan_up, &c.wlan_down};
    for (int k = 0; k < 6; ++k) d.observed[k] = rng.lognormal(links[k]->median, links[k]->sigma);
    for (int k = 0; k < 6; ++k) d.noise[k] = rng.normal();
    d.edge_util_noise = rng.normal();
    d.cloud_util_noise = rng.normal();
    d.drop_u = rng.uniform();
    d.return_rsu = rng.uniform_int(1, c.n_rsu);
    d.stochastic_choice = rng.uniform_int(0, 2);
    return d;
}

std::vector<std::string> route_of(const SimConfig& c, Op op, const Draws& d) {
    const int rsu = static_cast<int>(d.location * c.n_rsu / c.n_locations) + 1;
    const int es = static_cast<int>(d.location % c.n_es) + 1;
    switch (op) {
        case ViaCellular:
            return {"USER", "BS", "CC", "CLOUD", "CC", "BS", "USER"};
        case ViaRsu:
            return {"USER", numbered("RSU", rsu), "WAN", "CLOUD", "WAN", numbered("RSU", static_cast<int>(d.return_rsu)),
                    "USER"};
        case ToEdge:
            return {"USER", numbered("ES", es), "USER"};
    }
    return {};
}

double clamp_util(double u) { return std::clamp(u, 0.0, 0.9); }

Dataset decision_dataset(const Corpus& history) {
    Dataset out;
    for (const auto& t : history) out.push_back(*t.features);
    return out;
}

Corpus training_history(const SimConfig& config) {
    SimConfig train = config;
    train.n_tasks = config.training_tasks;
    train.seed = mix_seed(config.seed, kTrainingStream);
    return simulate_with(train, nullptr, "").traces;
}

DecisionModel model_for(const std::string& policy, const Corpus& history, const SimConfig& config) {
    if (policy == "human-prior") return DecisionModel::train(history, config.human_prior_features, config.model_bins);
    return DecisionModel::train(history, intent_feature_inputs(history, config.intent_features), config.model_bins);
}

bool is_trained(const std::string& policy) { return policy == "human-prior" || policy == "intent-feature"; }

void check_lognormal(const char* name, const LogNormalParam& p) {
    if (!(std::isfinite(p.median) && p.median > 0 && std::isfinite(p.sigma) && p.sigma > 0))
        throw Error("invalid-config", std::string(name) + " needs a finite positive median and sigma");
}

void check_positive(const char* name, double v) {
    if (!(std::isfinite(v) && v > 0)) throw Error("invalid-config", std::string(name) + " must be finite and positive");
}

}  // namespace

bool Topology::connected(const std::vector<std::string>& route) const {
    for (std::size_t k = 0; k + 1 < route.size(); ++k)
        if (!links.count({route[k], route[k + 1]})) return false;
    return !route.empty();
}

std::vector<std::string> Topology::probe_symbols(const std::vector<std::string>& route) const {
    std::vector<std::string> out;
    for (const auto& e : route)
        if (probed.count(e)) out.push_back(e);
    return out;
}

Topology default_topology(int n_rsu, int n_es) {
    Topology t;
    t.entities = {"USER", "BS", "CC", "CLOUD", "WAN", "MAN"};
    auto both = [&](const std::string& a, const std::string& b) {
        t.links.insert({a, b});
        t.links.insert({b, a});
    };
    both("USER", "BS");
    both("BS", "CC");
    both("CC", "CLOUD");
    both("WAN", "CLOUD");
    for (int k = 1; k <= n_rsu; ++k) {
        const auto r = numbered("RSU", k);
        t.entities.push_back(r);
        both("USER", r);
        both(r, "WAN");
        both(r, "MAN");
    }
    for (int k = 1; k <= n_es; ++k) {
        const auto e = numbered("ES", k);
        t.entities.push_back(e);
        both("USER", e);
        both(e, "MAN");
    }
    for (const auto& e : t.entities)
        if (e != "BS" && e != "MAN") t.probed.insert(e);
    return t;
}

void require_valid(const SimConfig& c) {
    const std::string& p = c.policy;
    if (!(p == "stochastic" || is_trained(p) || std::find(kOperations.begin(), kOperations.end(), p) != kOperations.end()))
        throw Error("invalid-config", "unknown policy '" + p + "'");
    if (c.n_rsu < 1 || c.n_es < 1 || c.n_locations < 1) throw Error("invalid-config", "entity counts must be positive");
    check_positive("deadline_ms", c.deadline_ms);
    check_lognormal("wan_up", c.wan_up);
    check_lognormal("wan_down", c.wan_down);
    check_lognormal("cell_up", c.cell_up);
    check_lognormal("cell_down", c.cell_down);
    check_lognormal("wlan_up", c.wlan_up);
    check_lognormal("wlan_down", c.wlan_down);
    if (!(std::isfinite(c.delay_noise) && c.delay_noise >= 0)) throw Error("invalid-config", "delay_noise must be >= 0");
    check_positive("wlan_rate", c.wlan_rate);
    check_positive("wan_rate", c.wan_rate);
    check_positive("cell_rate", c.cell_rate);
    check_positive("edge_capacity", c.edge_capacity);
    check_positive("cloud_capacity", c.cloud_capacity);
    for (const auto* r : {&c.file_kb, &c.result_kb, &c.instructions})
        if (r->lo <= 0 || r->hi < r->lo) throw Error("invalid-config", "size ranges need 0 < lo <= hi");
    for (double u : {c.edge_util_base, c.cloud_util_base, c.util_gain, c.util_noise})
        if (!(std::isfinite(u) && u >= 0)) throw Error("invalid-config", "utilization parameters must be >= 0");
    for (double q : {c.drop_edge, c.drop_rsu, c.drop_cellular})
        if (!(q >= 0 && q <= 1)) throw Error("invalid-config", "drop probabilities must lie in [0, 1]");
    if (c.window == 0) throw Error("invalid-config", "window must be positive");
    if (c.model_bins < 1 || c.intent_features == 0) throw Error("invalid-config", "decision model needs inputs");
    if (is_trained(p) && c.training_tasks < kMinRecords)
        throw Error("invalid-config", "training_tasks below " + std::to_string(kMinRecords));
}

nlohmann::json to_json(const SimConfig& c) {
    auto ln = [](const LogNormalParam& p) { return nlohmann::json{{"median", p.median}, {"sigma", p.sigma}}; };
    auto range = [](const IntRange& r) { return nlohmann::json{{"lo", r.lo}, {"hi", r.hi}}; };
    return {{"n_tasks", c.n_tasks},
            {"seed", c.seed},
            {"policy", c.policy},
            {"n_rsu", c.n_rsu},
            {"n_es", c.n_es},
            {"n_locations", c.n_locations},
            {"deadline_ms", c.deadline_ms},
            {"wan_up", ln(c.wan_up)},
            {"wan_down", ln(c.wan_down)},
            {"cell_up", ln(c.cell_up)},
            {"cell_down", ln(c.cell_down)},
            {"wlan_up", ln(c.wlan_up)},
            {"wlan_down", ln(c.wlan_down)},
            {"delay_noise", c.delay_noise},
            {"wlan_rate", c.wlan_rate},
            {"wan_rate", c.wan_rate},
            {"cell_rate", c.cell_rate},
            {"edge_capacity", c.edge_capacity},
            {"cloud_capacity", c.cloud_capacity},
            {"file_kb", range(c.file_kb)},
            {"result_kb", range(c.result_kb)},
            {"instructions", range(c.instructions)},
            {"edge_util_base", c.edge_util_base},
            {"cloud_util_base", c.cloud_util_base},
            {"util_gain", c.util_gain},
            {"util_noise", c.util_noise},
            {"drop_edge", c.drop_edge},
            {"drop_rsu", c.drop_rsu},
            {"drop_cellular", c.drop_cellular},
            {"window", c.window},
            {"human_prior_features", c.human_prior_features},
            {"intent_features", c.intent_features},
            {"model_bins", c.model_bins},
            {"training_tasks", c.training_tasks}};
}

SimConfig sim_config_from_json(const nlohmann::json& doc) {
    SimConfig c;
    if (!doc.is_object()) throw Error("invalid-config", "config must be a JSON object");
    const auto known = to_json(c);
    for (const auto& [k, v] : doc.items())
        if (!known.contains(k)) throw Error("invalid-config", "unknown key '" + k + "'");
    try {
        auto get = [&](const char* key, auto& field) {
            if (doc.contains(key)) doc.at(key).get_to(field);
        };
        auto ln = [&](const char* key, LogNormalParam& p) {
            if (!doc.contains(key)) return;
            p.median = doc.at(key).at("median").get<double>();
            p.sigma = doc.at(key).at("sigma").get<double>();
        };
        auto range = [&](const char* key, IntRange& r) {
            if (!doc.contains(key)) return;
            r.lo = doc.at(key).at("lo").get<std::int64_t>();
            r.hi = doc.at(key).at("hi").get<std::int64_t>();
        };
        get("n_tasks", c.n_tasks);
        get("seed", c.seed);
        get("policy", c.policy);
        get("n_rsu", c.n_rsu);
        get("n_es", c.n_es);
        get("n_locations", c.n_locations);
        get("deadline_ms", c.deadline_ms);
        ln("wan_up", c.wan_up);
        ln("wan_down", c.wan_down);
        ln("cell_up", c.cell_up);
        ln("cell_down", c.cell_down);
        ln("wlan_up", c.wlan_up);
        ln("wlan_down", c.wlan_down);
        get("delay_noise", c.delay_noise);
        get("wlan_rate", c.wlan_rate);
        get("wan_rate", c.wan_rate);
        get("cell_rate", c.cell_rate);
        get("edge_capacity", c.edge_capacity);
        get("cloud_capacity", c.cloud_capacity);
        range("file_kb", c.file_kb);
        range("result_kb", c.result_kb);
        range("instructions", c.instructions);
        get("edge_util_base", c.edge_util_base);
        get("cloud_util_base", c.cloud_util_base);
        get("util_gain", c.util_gain);
        get("util_noise", c.util_noise);
        get("drop_edge", c.drop_edge);
        get("drop_rsu", c.drop_rsu);
        get("drop_cellular", c.drop_cellular);
        get("window", c.window);
        get("human_prior_features", c.human_prior_features);
        get("intent_features", c.intent_features);
        get("model_bins", c.model_bins);
        get("training_tasks", c.training_tasks);
    } catch (const nlohmann::json::exception& e) {
        throw Error("invalid-config", e.what());
    }
    require_valid(c);
    return c;
}

DecisionModel DecisionModel::train(const Corpus& history, std::vector<std::string> features, int bins) {
    DecisionModel m;
    m.features_ = std::move(features);
    const Dataset data = decision_dataset(history);
    std::size_t cells = 1;
    for (const auto& f : m.features_) {
        const auto d = discretize_feature(data, f, bins);
        m.cuts_.push_back(d.categorical ? std::vector<double>{} : d.cuts);
        cells *= m.cuts_.back().size() + 1;
    }
    m.table_.assign(cells, {});
    for (const auto& t : history) {
        auto& slot = m.table_[m.cell(*t.features)][op_index(t.op)];
        slot.second += 1;
        if (std::get<std::string>(t.features->at("F0")) == "success") slot.first += 1;
    }
    return m;
}

std::size_t DecisionModel::cell(const FeatureRecord& state) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < features_.size(); ++k) {
        const auto it = state.find(features_[k]);
        if (it == state.end()) throw Error("missing-feature", "decision input " + features_[k] + " is absent");
        std::size_t bin = 0;
        if (is_numeric(it->second)) {
            const auto& cuts = cuts_[k];
            bin = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), std::get<double>(it->second)) -
                                           cuts.begin());
        }
        idx = idx * (cuts_[k].size() + 1) + bin;
    }
    return idx;
}

double DecisionModel::success_estimate(const std::string& op, const FeatureRecord& state) const {
    const auto& [s, n] = table_[cell(state)][op_index(op)];
    return (s + 1.0) / (n + 2.0);
}

std::string DecisionModel::choose(const FeatureRecord& state) const {
    std::string best;
    double best_p = -1.0;
    for (const char* op : kOperations) {
        const double p = success_estimate(op, state);
        if (p > best_p) best_p = p, best = op;
    }
    return best;
}

SimOutput simulate_with(const SimConfig& c, const DecisionModel* model, const std::string& fixed_op) {
    require_valid(c);
    const Topology topo = default_topology(c.n_rsu, c.n_es);
    SimOutput out;
    out.traces.reserve(c.n_tasks);
    std::deque<Op> recent;
    std::array<std::size_t, 3> window_counts{};
    const double w = static_cast<double>(c.window);

    for (std::size_t i = 0; i < c.n_tasks; ++i) {
        const Draws d = draw(c, mix_seed(c.seed, i));
        const double util_e = clamp_util(c.edge_util_base + c.util_gain * window_counts[ToEdge] / w +
                                         c.util_noise * d.edge_util_noise);
        const double util_c = clamp_util(c.cloud_util_base +
                                         c.util_gain * (window_counts[ViaCellular] + window_counts[ViaRsu]) / w +
                                         c.util_noise * d.cloud_util_noise);

        FeatureRecord f;
        f["F3"] = static_cast<double>(d.location);
        f["F4"] = static_cast<double>(d.file_kb);
        f["F5"] = static_cast<double>(d.result_kb);
        f["F6"] = static_cast<double>(d.instructions);
        for (int k = 0; k < 6; ++k) f["F" + std::to_string(7 + k)] = d.observed[k];
        f["F13"] = util_e;
        f["F14"] = util_c;
        f["F15"] = static_cast<double>(window_counts[ToEdge]);
        f["F16"] = static_cast<double>(window_counts[ViaRsu]);
        f["F17"] = static_cast<double>(window_counts[ViaCellular]);

        Op op;
        if (!fixed_op.empty())
            op = op_index(fixed_op);
        else if (model)
            op = op_index(model->choose(f));
        else
            op = static_cast<Op>(d.stochastic_choice);

        std::array<double, 6> delay{};
        for (int k = 0; k < 6; ++k) delay[k] = d.observed[k] * std::exp(c.delay_noise * d.noise[k]);
        const auto [wan_up, wan_down, cell_up, cell_down, wlan_up, wlan_down] = delay;
        const double file = static_cast<double>(d.file_kb), result = static_cast<double>(d.result_kb);
        const double instr = static_cast<double>(d.instructions);
        const double cloud = instr / (c.cloud_capacity * (1.0 - util_c));
        double service = 0.0, drop = 0.0;
        switch (op) {
            case ViaCellular:
                service = cell_up + file / c.cell_rate + cloud + cell_down + result / c.cell_rate;
                drop = c.drop_cellular;
                break;
            case ViaRsu:
                service = wlan_up + wan_up + file / c.wan_rate + cloud + wan_down + wlan_down + result / c.wan_rate;
                drop = c.drop_rsu;
                break;
            case ToEdge:
                service = wlan_up + file / c.wlan_rate + instr / (c.edge_capacity * (1.0 - util_e)) + wlan_down +
                          result / c.wlan_rate;
                drop = c.drop_edge;
                break;
        }
        const bool success = d.drop_u >= drop && service <= c.deadline_ms;
        f["F0"] = std::string(success ? "success" : "failure");
        f["F1"] = std::string(op == ToEdge ? "V_e" : "V_c");
        f["F2"] = service;

        const auto route = route_of(c, op, d);
        if (!topo.connected(route)) throw Error("invalid-config", "route is not connected in the topology");
        out.traces.push_back({"t" + std::to_string(i), topo.probe_symbols(route), std::move(f), kOperations[op]});

        recent.push_back(op);
        ++window_counts[op];
        if (recent.size() > c.window) {
            --window_counts[recent.front()];
            recent.pop_front();
        }
    }
    return out;
}

std::vector<std::string> intent_feature_inputs(const Corpus& history, std::size_t k) {
    Dataset data;
    for (const auto& t : history) {
        FeatureRecord r;
        for (const auto& [f, v] : *t.features)
            if (f != "F1" && f != "F2") r.emplace(f, v);
        data.push_back(std::move(r));
    }
    CaogConfig cfg;
    cfg.estimator = Estimator::MutualInformation;
    const auto ranked = relevance_scores(data, "F0", cfg).ranked();
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < k; ++i) out.push_back(ranked[i].first);
    return out;
}

SimOutput simulate(const SimConfig& config) {
    require_valid(config);
    if (!is_trained(config.policy))
        return simulate_with(config, nullptr, config.policy == "stochastic" ? "" : config.policy);
    const auto model = model_for(config.policy, training_history(config), config);
    return simulate_with(config, &model, "");
}

EvalResult run_policy_eval(const SimConfig& config, const std::vector<std::string>& policies, std::size_t episodes,
                           std::size_t window) {
    if (std::find(policies.begin(), policies.end(), "stochastic") == policies.end())
        throw Error("missing-stochastic-policy", "the stochastic policy provides the training data");
    if (window == 0) throw Error("invalid-config", "evaluation window must be positive");
    for (const auto& p : policies) {
        SimConfig probe = config;
        probe.policy = p;
        require_valid(probe);
    }
    const Corpus history = training_history(config);

    SimConfig eval = config;
    eval.n_tasks = episodes;
    eval.seed = mix_seed(config.seed, kEvalStream);

    EvalResult result;
    for (const auto& p : policies) {
        PolicySummary summary{p, 0.0, {}};
        SimOutput run;
        if (is_trained(p)) {
            const auto model = model_for(p, history, config);
            summary.inputs = model.features();
            run = simulate_with(eval, &model, "");
        } else {
            run = simulate_with(eval, nullptr, p == "stochastic" ? "" : p);
        }
        std::size_t failures = 0, block = 0;
        for (std::size_t i = 0; i < run.traces.size(); ++i) {
            const bool fail = std::get<std::string>(run.traces[i].features->at("F0")) == "failure";
            failures += fail;
            block += fail;
            if ((i + 1) % window == 0 || i + 1 == run.traces.size()) {
                const std::size_t len = (i % window) + 1;
                result.rows.push_back({i + 1, p, static_cast<double>(block) / static_cast<double>(len)});
                block = 0;
            }
        }
        summary.failure_rate = episodes ? static_cast<double>(failures) / static_cast<double>(episodes) : 0.0;
        result.summary.push_back(std::move(summary));
    }
    return result;
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
    std::string out = "episode,policy,failure_rate\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.failure_rate);
        out += std::to_string(r.episode) + "," + r.policy + "," + buf + "\n";
    }
    return out;
}

}  // namespace stcaog
