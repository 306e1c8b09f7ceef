#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace stcaog {

// Orders ids so that embedded integers compare numerically: F2 < F10.
struct NaturalLess {
    using is_transparent = void;
    bool operator()(std::string_view a, std::string_view b) const;
};

using FeatureValue = std::variant<double, std::string>;
using FeatureRecord = std::map<std::string, FeatureValue, NaturalLess>;

std::string feature_value_text(const FeatureValue& v);
bool is_numeric(const FeatureValue& v);

// One observed task: the probe-symbol path it traversed, optionally with the
// feature record collected for it and the operation that produced it.
struct Trace {
    std::string id;
    std::vector<std::string> path;
    std::optional<FeatureRecord> features;
    std::string op;
};

using Corpus = std::vector<Trace>;

// Distinct paths with multiplicities, in lexicographic path order.
std::map<std::vector<std::string>, std::size_t> path_histogram(const Corpus& corpus);

// JSON lines, one object per trace: {"id", "path": [...], "op"?, "features"?}.
// Feature values are JSON numbers or strings. Blank lines are skipped.
nlohmann::json to_json(const Trace& trace);
Trace trace_from_json(const nlohmann::json& doc);
Corpus corpus_from_jsonl(std::istream& in);
std::string corpus_to_jsonl(const Corpus& corpus);

}  // namespace stcaog
