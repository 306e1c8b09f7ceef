#pragma once

// Inside / max-product chart over one grammar and one terminal sequence.
// Flat AND nodes are evaluated as a left-leaning chain of binary splits.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stcaog/grammar.hpp"

namespace stcaog::detail {

class SpanChart {
public:
    enum class Mode { Sum, Max };

    SpanChart(const Grammar& grammar, std::span<const std::string> path, Mode mode);

    // Probability (Sum) or best derivation probability (Max) of `id` over [i, j).
    double inside(const std::string& id, std::size_t i, std::size_t j);
    double total() { return path_.empty() ? 0.0 : inside(grammar_.start(), 0, path_.size()); }

    // Walks the best derivation of `id` over [i, j) (Max mode only), calling
    // `on_or(or_id, child_id, span_begin)` for every OR choice in pre-order.
    void trace(const std::string& id, std::size_t i, std::size_t j,
               const std::function<void(const std::string&, const std::string&, std::size_t)>& on_or);

private:
    struct NodeInfo {
        NodeKind kind = NodeKind::Terminal;
        std::vector<int> children;
        std::vector<double> weights;
    };

    int index_of(const std::string& id) const;
    double inside_idx(int node, std::size_t i, std::size_t j);
    double seq(int node, std::size_t m, std::size_t i, std::size_t j);
    std::uint64_t key(int node, std::size_t m, std::size_t i, std::size_t j) const;
    void trace_idx(int node, std::size_t i, std::size_t j,
                   const std::function<void(const std::string&, const std::string&, std::size_t)>& on_or);
    void trace_seq(int node, std::size_t m, std::size_t i, std::size_t j,
                   const std::function<void(const std::string&, const std::string&, std::size_t)>& on_or);

    const Grammar& grammar_;
    std::span<const std::string> path_;
    Mode mode_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    std::vector<NodeInfo> info_;
    std::vector<std::size_t> min_len_;
    std::unordered_map<std::uint64_t, double> memo_;
};

}  // namespace stcaog::detail
