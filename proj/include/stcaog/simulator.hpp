#pragma once

// Edge-offloading scenario generator: a vehicle (USER) offloads each task to
// an edge server, to the cloud through a road-side unit and the WAN, or to
// the cloud through the cellular network. Probes on entity ports record the
// traversal; each task also yields an 18-feature record F0..F17.

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stcaog/corpus.hpp"

namespace stcaog {

inline constexpr std::array<const char*, 3> kOperations = {"O_c", "O_r", "O_e"};

struct Topology {
    std::vector<std::string> entities;
    std::set<std::string> probed;  // entities whose ports emit probe symbols
    std::set<std::pair<std::string, std::string>> links;  // directed

    bool connected(const std::vector<std::string>& route) const;
    // The probe symbols a route emits, in traversal order.
    std::vector<std::string> probe_symbols(const std::vector<std::string>& route) const;
};

// USER, BS, CC, CLOUD, WAN, MAN, RSU1..RSU<n_rsu>, ES1..ES<n_es>. BS and MAN
// carry traffic but have no probes.
Topology default_topology(int n_rsu, int n_es);

struct LogNormalParam {
    double median = 1.0;
    double sigma = 0.0;
};

struct IntRange {
    std::int64_t lo = 1;
    std::int64_t hi = 1;
};

struct SimConfig {
    std::size_t n_tasks = 10000;
    std::uint64_t seed = 42;
    std::string policy = "stochastic";  // stochastic | human-prior | intent-feature | O_c | O_r | O_e

    int n_rsu = 3;
    int n_es = 5;
    int n_locations = 5;

    double deadline_ms = 250.0;
    // Link delays observed at decision time (ms).
    LogNormalParam wan_up{30.0, 0.5}, wan_down{30.0, 0.5};
    LogNormalParam cell_up{45.0, 0.6}, cell_down{40.0, 0.6};
    LogNormalParam wlan_up{20.0, 0.6}, wlan_down{20.0, 0.6};
    double delay_noise = 0.15;  // experienced = observed * exp(delay_noise * N(0,1))
    // Transfer rates (KB/ms) and compute capacities (instructions/ms).
    double wlan_rate = 10.0, wan_rate = 5.0, cell_rate = 4.0;
    double edge_capacity = 20.0, cloud_capacity = 60.0;
    IntRange file_kb{50, 400}, result_kb{5, 50}, instructions{200, 2000};
    // Utilization = base + gain * share of the recent window, plus noise.
    double edge_util_base = 0.2, cloud_util_base = 0.2, util_gain = 0.3, util_noise = 0.05;
    double drop_edge = 0.35, drop_rsu = 0.04, drop_cellular = 0.03;
    std::size_t window = 50;  // recent-offload counting window for F13..F17

    // Decision models.
    std::vector<std::string> human_prior_features = {"F4", "F6", "F13", "F14"};
    std::size_t intent_features = 4;
    int model_bins = 3;
    std::size_t training_tasks = 10000;
};

void require_valid(const SimConfig& config);  // invalid-config
nlohmann::json to_json(const SimConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
SimConfig sim_config_from_json(const nlohmann::json& doc);

struct SimOutput {
    Corpus traces;  // one per task, with op tag and features
};

// Policy choosing among kOperations from the decision-time features
// (F3..F17 without outcomes). Trained models are per-operation success
// tables over equal-frequency cells of their input features.
class DecisionModel {
public:
    static DecisionModel train(const Corpus& history, std::vector<std::string> features, int bins);

    const std::vector<std::string>& features() const { return features_; }
    std::string choose(const FeatureRecord& state) const;
    double success_estimate(const std::string& op, const FeatureRecord& state) const;

private:
    std::size_t cell(const FeatureRecord& state) const;

    std::vector<std::string> features_;
    std::vector<std::vector<double>> cuts_;
    std::vector<std::array<std::pair<double, double>, 3>> table_;  // cell -> op -> (successes, trials)
};

// Runs `config.n_tasks` tasks. Trained policies first learn from a
// stochastic run of `config.training_tasks` tasks on an independent stream.
SimOutput simulate(const SimConfig& config);

// Runs `config.n_tasks` tasks with the given chooser. Task i draws every
// random quantity from its own stream mix_seed(seed, i), so two policies
// see the same tasks.
SimOutput simulate_with(const SimConfig& config, const DecisionModel* model, const std::string& fixed_op);

// Top `k` decision-time features by relevance to F0 under mutual information.
std::vector<std::string> intent_feature_inputs(const Corpus& history, std::size_t k);

struct EvalRow {
    std::size_t episode = 0;  // last task index of the window, 1-based
    std::string policy;
    double failure_rate = 0.0;
};

struct PolicySummary {
    std::string policy;
    double failure_rate = 0.0;  // over all evaluated tasks
    std::vector<std::string> inputs;
};

struct EvalResult {
    std::vector<EvalRow> rows;
    std::vector<PolicySummary> summary;
};

// Trains on a stochastic run, then evaluates each policy on `episodes`
// common tasks, reporting the failure rate of each consecutive block of
// `window` tasks.
EvalResult run_policy_eval(const SimConfig& config, const std::vector<std::string>& policies, std::size_t episodes,
                           std::size_t window);

std::string eval_csv(const std::vector<EvalRow>& rows);

}  // namespace stcaog
