#pragma once

// Causal layer: rank features by statistical dependence on an intent
// feature, then grow an And/Or grammar top-down from the intent.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stcaog/corpus.hpp"
#include "stcaog/grammar.hpp"

namespace stcaog {

using Dataset = std::vector<FeatureRecord>;

enum class Estimator { AbsCorrelation, MutualInformation };

std::string_view estimator_name(Estimator e);  // "abs-correlation", "mutual-information"
Estimator parse_estimator(std::string_view name);

struct CaogConfig {
    Estimator estimator = Estimator::MutualInformation;
    int top_k = 2;
    std::optional<double> threshold;  // when set, keep every feature scoring at least this much
    int bins = 4;
    int max_depth = 1;
};

void require_valid(const CaogConfig& config);

struct RelevanceScores {
    std::string intent;
    Estimator estimator = Estimator::MutualInformation;
    std::vector<std::pair<std::string, double>> scores;  // natural feature order
    double consistency = 0.0;                            // held-out accuracy in [0, 1]

    // Features by decreasing score; equal scores keep natural feature order.
    std::vector<std::pair<std::string, double>> ranked() const;
};

// Minimum number of records relevance scoring accepts.
inline constexpr std::size_t kMinRecords = 30;

RelevanceScores relevance_scores(const Dataset& data, const std::string& intent, const CaogConfig& config);

struct Discretization {
    std::string feature;
    bool categorical = false;
    bool constant = false;             // one distinct value
    std::vector<std::string> symbols;  // categorical: sorted values; numeric: one per range, ascending
    std::vector<double> cuts;          // numeric: interior boundaries, range k is [cuts[k-1], cuts[k])

    std::string symbol_of(const FeatureValue& v) const;
    std::size_t index_of(const FeatureValue& v) const;
};

// Categorical values map to themselves; numeric values to equal-frequency
// half-open ranges named "<feature>:<lo>..<hi>".
Discretization discretize_feature(const Dataset& data, const std::string& feature, int bins);

Grammar build_caog(const Dataset& data, const std::string& intent, const CaogConfig& config);

std::string relevance_csv(const RelevanceScores& scores);

// CSV with a header of feature ids; cells that parse fully as numbers are
// numeric, everything else categorical.
Dataset dataset_from_csv(std::istream& in);
std::string dataset_to_csv(const Dataset& data);

}  // namespace stcaog
