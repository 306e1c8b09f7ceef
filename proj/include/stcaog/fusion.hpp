#pragma once

// The composite STC-AOG: three layer grammars joined by conditional
// cross-links. T-terminals (micro-actions) link down to S nodes; C value
// terminals link down to T operations.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stcaog/corpus.hpp"
#include "stcaog/grammar.hpp"

namespace stcaog {

struct CrossLink {
    std::string from;
    std::string to;
    double p = 1.0;

    bool operator==(const CrossLink&) const = default;
};

struct StcAog {
    Grammar s;
    Grammar t;
    Grammar c;
    std::vector<CrossLink> links_ts;  // T-terminal -> S node
    std::vector<CrossLink> links_ct;  // C value -> T operation
    std::size_t origin_len = 0;       // leading path symbols outside the S/T frontier
    std::vector<std::string> exogenous;  // C values with no operation link

    bool operator==(const StcAog&) const = default;
};

// One observed use of a micro-action on an S node.
struct MicroActionUse {
    std::string action;
    std::string s_node;
};

// Uses read off the Viterbi derivations of the corpus: each hop contributes
// (micro-action, S node that derived it).
std::vector<MicroActionUse> annotate_micro_actions(const Grammar& s, const Corpus& corpus, std::size_t origin_len = 1);

struct LinkOptions {
    bool soft = false;  // link every observed pair instead of the argmax only
};

// Links each T-terminal to its most frequent S node, p = count(a, s) / count(a).
// Ties go to the lexicographically smallest S node. T-terminals never observed
// are appended to `unlinked` when given.
std::vector<CrossLink> link_s_to_t(const Grammar& s, const Grammar& t, const std::vector<MicroActionUse>& uses,
                                   const LinkOptions& options = {}, std::vector<std::string>* unlinked = nullptr);

// Feature Or node of `c` that holds the values of `feature`, if any.
const Node* c_feature_node(const Grammar& c, const std::string& feature);

// Value terminal of `c` that `value` of `feature` falls into. Numeric values
// outside the learned ranges clamp to the nearest range.
std::optional<std::string> c_value_symbol(const Grammar& c, const std::string& feature, const FeatureValue& value);

// Links each observed C value v to every operation maximizing P(v | op)
// (ties within 1e-9 all linked), p = count(v, op) / count(v).
std::vector<CrossLink> link_t_to_c(const Grammar& t, const Grammar& c,
                                   const std::vector<std::pair<std::string, FeatureRecord>>& records,
                                   const LinkOptions& options = {});

// Assembles and validates the composite; C values without links become
// exogenous.
StcAog fuse(Grammar s, Grammar t, Grammar c, std::vector<CrossLink> links_ts, std::vector<CrossLink> links_ct,
            std::size_t origin_len = 0);

// Throws on the first violated composite invariant.
void require_valid(const StcAog& aog);

// Operations reachable from a C value: the T start or its direct children.
bool is_operation(const Grammar& t, const std::string& id);

nlohmann::json to_json(const StcAog& aog);
StcAog stc_from_json(const nlohmann::json& doc);

std::string export_dot(const StcAog& aog);

}  // namespace stcaog
