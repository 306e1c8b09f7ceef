#pragma once

// Bottom-up learning of the spatial and temporal grammars: start from a
// grammar that generates exactly the corpus, then greedily insert And / Or
// fragments while the log-posterior (compactness prior + corpus likelihood)
// improves.

#include <cstdint>
#include <string>
#include <vector>

#include "stcaog/corpus.hpp"
#include "stcaog/grammar.hpp"

namespace stcaog {

struct InductionConfig {
    double alpha = 1.0;               // prior weight per grammar node
    int max_iterations = 100;
    double min_posterior_gain = 1e-9;
    std::uint64_t seed = 0;
    int plateau_window = 3;           // stall rows recorded once no fragment helps
};

void require_valid(const InductionConfig& config);

struct Fragment {
    std::string root;
    NodeKind kind = NodeKind::And;
    std::vector<std::string> children;

    // Stable text form used for logging and tie-breaking, e.g. "and(a,b)".
    std::string signature() const;
    bool operator==(const Fragment&) const = default;
};

struct IterationRecord {
    int iteration = 0;
    std::string fragment;  // "init", an accepted fragment signature, or "-" for a stall
    double log_prior = 0.0;
    double log_likelihood = 0.0;
    double log_posterior = 0.0;
};

struct InductionResult {
    Grammar grammar;
    std::vector<IterationRecord> log;
    std::size_t fragment_count = 0;  // non-terminals other than the start symbol
};

Grammar build_initial_grammar(const Corpus& corpus, Layer layer);

std::vector<Fragment> enumerate_bigram_fragments(const Corpus& corpus);

double log_prior(const Grammar& grammar, const InductionConfig& config);

// Sum over records of log P(path | grammar), marginalising over derivations.
// Returns -infinity when some path cannot be derived.
double log_likelihood(const Grammar& grammar, const Corpus& corpus);

// Frequency re-estimation of every OR edge from the Viterbi derivations of
// the corpus. OR nodes no derivation visits get uniform weights.
Grammar estimate_or_probabilities(const Grammar& grammar, const Corpus& corpus);

InductionResult induce(const Corpus& corpus, const InductionConfig& config, Layer layer);

std::string iteration_log_csv(const std::vector<IterationRecord>& log);

std::size_t fragment_count(const Grammar& grammar);

// --- layer pipelines -------------------------------------------------------

// Splits each path into micro-action instances: the first `origin_len`
// symbols are the request origin, the rest is cut into consecutive pairs
// (a trailing odd symbol becomes a unary instance). Instance ids are
// "<trace id>#<k>"; op tags are carried over.
Corpus segment_hops(const Corpus& corpus, std::size_t origin_len = 1);

// Spatial layer: induce over the hop instances, then name each start-level
// fragment (a micro-action) A1..An in lexicographic order of its yield.
InductionResult induce_spatial(const Corpus& corpus, const InductionConfig& config,
                               std::size_t origin_len = 1);

// The micro-action of the spatial grammar that derives `hop` (Viterbi).
std::string micro_action_of(const Grammar& spatial, const std::vector<std::string>& hop);

// Rewrites each trace as its sequence of micro-actions.
Corpus micro_action_corpus(const Grammar& spatial, const Corpus& corpus, std::size_t origin_len = 1);

// Temporal layer: induce over micro-action sequences, then name each
// top-level alternative after the majority operation tag of its traces.
InductionResult induce_temporal(const Corpus& corpus, const Grammar& spatial, const InductionConfig& config,
                                std::size_t origin_len = 1);

}  // namespace stcaog
