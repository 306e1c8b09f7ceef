#include "span_chart.hpp"

#include <algorithm>
#include <limits>

#include "stcaog/error.hpp"

namespace stcaog::detail {

SpanChart::SpanChart(const Grammar& grammar, std::span<const std::string> path, Mode mode)
    : grammar_(grammar), path_(path), mode_(mode) {
    if (path.size() >= 1024) throw Error("path-too-long", "chart supports paths shorter than 1024 symbols");
    for (const auto& t : grammar.terminals()) {
        index_.emplace(t, static_cast<int>(names_.size()));
        names_.push_back(t);
        info_.push_back({});
    }
    for (const auto& [id, n] : grammar.nodes()) {
        index_.emplace(id, static_cast<int>(names_.size()));
        names_.push_back(id);
        info_.push_back({n.kind, {}, {}});
    }
    for (const auto& [id, n] : grammar.nodes()) {
        auto& inf = info_[index_.at(id)];
        for (const auto& e : n.children) {
            inf.children.push_back(index_of(e.id));
            inf.weights.push_back(e.p);
        }
        if (inf.children.size() >= 127) throw Error("arity-too-large", id + " has too many children");
    }
    // Shortest yield per node; every node yields at least one symbol.
    min_len_.assign(names_.size(), 1);
    for (const auto& id : topological_order(grammar)) {
        const auto& inf = info_[index_.at(id)];
        std::size_t v = 0;
        if (inf.kind == NodeKind::And) {
            for (int c : inf.children) v += c >= 0 ? min_len_[c] : 1;
        } else {
            v = std::numeric_limits<std::size_t>::max();
            for (int c : inf.children) v = std::min(v, c >= 0 ? min_len_[c] : std::size_t{1});
        }
        min_len_[index_.at(id)] = std::max<std::size_t>(v, 1);
    }
}

int SpanChart::index_of(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? -1 : it->second;
}

std::uint64_t SpanChart::key(int node, std::size_t m, std::size_t i, std::size_t j) const {
    return ((static_cast<std::uint64_t>(node) * 128 + m) * 1024 + i) * 1024 + j;
}

double SpanChart::inside(const std::string& id, std::size_t i, std::size_t j) {
    const int idx = index_of(id);
    return idx < 0 ? 0.0 : inside_idx(idx, i, j);
}

double SpanChart::inside_idx(int node, std::size_t i, std::size_t j) {
    if (node < 0 || j <= i || j - i < min_len_[node]) return 0.0;
    const auto& inf = info_[node];
    if (inf.kind == NodeKind::Terminal) return (j == i + 1 && path_[i] == names_[node]) ? 1.0 : 0.0;
    if (inf.kind == NodeKind::And) return seq(node, 0, i, j);

    const auto k = key(node, 127, i, j);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
    double v = 0.0;
    for (std::size_t c = 0; c < inf.children.size(); ++c) {
        const double x = inf.weights[c] * inside_idx(inf.children[c], i, j);
        v = mode_ == Mode::Sum ? v + x : std::max(v, x);
    }
    memo_.emplace(k, v);
    return v;
}

double SpanChart::seq(int node, std::size_t m, std::size_t i, std::size_t j) {
    const auto& inf = info_[node];
    if (m + 1 == inf.children.size()) return inside_idx(inf.children[m], i, j);
    const auto k = key(node, m, i, j);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
    std::size_t rest = 0;
    for (std::size_t r = m + 1; r < inf.children.size(); ++r)
        rest += inf.children[r] >= 0 ? min_len_[inf.children[r]] : 1;
    double v = 0.0;
    for (std::size_t s = i + 1; s + rest <= j; ++s) {
        const double left = inside_idx(inf.children[m], i, s);
        if (left == 0.0) continue;
        const double x = left * seq(node, m + 1, s, j);
        v = mode_ == Mode::Sum ? v + x : std::max(v, x);
    }
    memo_.emplace(k, v);
    return v;
}

void SpanChart::trace(const std::string& id, std::size_t i, std::size_t j,
                      const std::function<void(const std::string&, const std::string&, std::size_t)>& on_or) {
    trace_idx(index_of(id), i, j, on_or);
}

void SpanChart::trace_idx(int node, std::size_t i, std::size_t j,
                          const std::function<void(const std::string&, const std::string&, std::size_t)>& on_or) {
    if (node < 0) return;
    const auto& inf = info_[node];
    if (inf.kind == NodeKind::Terminal) return;
    if (inf.kind == NodeKind::And) {
        trace_seq(node, 0, i, j, on_or);
        return;
    }
    const double best = inside_idx(node, i, j);
    for (std::size_t c = 0; c < inf.children.size(); ++c) {
        if (inf.weights[c] * inside_idx(inf.children[c], i, j) == best) {
            on_or(names_[node], names_[inf.children[c]], i);
            trace_idx(inf.children[c], i, j, on_or);
            return;
        }
    }
}

void SpanChart::trace_seq(int node, std::size_t m, std::size_t i, std::size_t j,
                          const std::function<void(const std::string&, const std::string&, std::size_t)>& on_or) {
    const auto& inf = info_[node];
    if (m + 1 == inf.children.size()) {
        trace_idx(inf.children[m], i, j, on_or);
        return;
    }
    const double best = seq(node, m, i, j);
    for (std::size_t s = i + 1; s < j; ++s) {
        const double left = inside_idx(inf.children[m], i, s);
        if (left == 0.0) continue;
        if (left * seq(node, m + 1, s, j) == best) {
            trace_idx(inf.children[m], i, s, on_or);
            trace_seq(node, m + 1, s, j, on_or);
            return;
        }
    }
}

}  // namespace stcaog::detail
