#include "stcaog/induction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "span_chart.hpp"
#include "stcaog/error.hpp"

namespace stcaog {

namespace {

using Sequence = std::vector<std::string>;
using SequenceCounts = std::map<Sequence, std::size_t>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string fresh_name(std::string base, const SymbolSet& taken) {
    while (taken.count(base)) base += '_';
    return base;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

void check_corpus(const Corpus& corpus) {
    if (corpus.empty()) throw Error("empty-corpus", "corpus has no records");
    for (const auto& t : corpus)
        if (t.path.empty()) throw Error("empty-path", "record '" + t.id + "' has an empty path");
}

SymbolSet corpus_symbols(const Corpus& corpus) {
    SymbolSet out;
    for (const auto& t : corpus) out.insert(t.path.begin(), t.path.end());
    return out;
}

Grammar rename_nodes(const Grammar& g, const std::map<std::string, std::string>& renames) {
    auto name = [&](const std::string& id) {
        auto it = renames.find(id);
        return it == renames.end() ? id : it->second;
    };
    std::vector<Node> nodes;
    for (const auto& [id, n] : g.nodes()) {
        Node m{name(id), n.kind, {}};
        for (const auto& e : n.children) m.children.push_back({name(e.id), e.p});
        nodes.push_back(std::move(m));
    }
    return Grammar(g.layer(), name(g.start()), g.terminals(), std::move(nodes));
}

// Working state of the greedy loop: the fragments introduced so far and the
// corpus reduced by them (distinct sequences with multiplicities).
struct WorkState {
    std::vector<Node> fragments;
    SequenceCounts sequences;
    int next_and = 1;
    int next_or = 1;
};

struct Candidate {
    std::string signature;
    WorkState next;
};

class Inducer {
public:
    Inducer(const Corpus& corpus, const InductionConfig& config, Layer layer)
        : corpus_(corpus), config_(config), layer_(layer), terminals_(corpus_symbols(corpus)) {
        const std::string tag(layer_tag(layer));
        start_name_ = fresh_name(tag + "_ROOT", terminals_);
        prefix_ = tag + "_";
    }

    InductionResult run() {
        InductionResult result;
        Grammar current = build_initial_grammar(corpus_, layer_);
        WorkState state;
        state.sequences = path_histogram(corpus_);

        double prior = log_prior(current, config_);
        double like = log_likelihood(current, corpus_);
        result.log.push_back({0, "init", prior, like, prior + like});

        int iteration = 0;
        int stalls = 0;
        while (iteration < config_.max_iterations && stalls == 0) {
            ++iteration;
            std::optional<Candidate> best;
            Grammar best_grammar;
            double best_posterior = kNegInf;
            for (auto& cand : candidates(state)) {
                Grammar g = realize(cand.next);
                const double p = log_prior(g, config_) + log_likelihood(g, corpus_);
                const bool better = !best || p > best_posterior ||
                                    (p == best_posterior && cand.signature < best->signature);
                if (better) {
                    best_posterior = p;
                    best_grammar = std::move(g);
                    best = std::move(cand);
                }
            }
            const double current_posterior = result.log.back().log_posterior;
            if (best && best_posterior - current_posterior > config_.min_posterior_gain) {
                state = std::move(best->next);
                current = std::move(best_grammar);
                prior = log_prior(current, config_);
                like = log_likelihood(current, corpus_);
                result.log.push_back({iteration, best->signature, prior, like, prior + like});
            } else {
                stalls = 1;
                result.log.push_back({iteration, "-", prior, like, prior + like});
            }
        }
        // The state no longer changes once a stall is recorded; the remaining
        // plateau rows document convergence in the log.
        while (stalls > 0 && stalls < config_.plateau_window && iteration < config_.max_iterations) {
            ++iteration;
            ++stalls;
            result.log.push_back({iteration, "-", prior, like, prior + like});
        }
        result.grammar = std::move(current);
        result.fragment_count = fragment_count(result.grammar);
        return result;
    }

private:
    SymbolSet taken_names(const WorkState& s) const {
        SymbolSet taken = terminals_;
        for (const auto& f : s.fragments) taken.insert(f.id);
        taken.insert(start_name_);
        return taken;
    }

    const Node* find_fragment(const WorkState& s, NodeKind kind, const std::vector<std::string>& children) const {
        for (const auto& f : s.fragments) {
            if (f.kind != kind || f.children.size() != children.size()) continue;
            bool same = true;
            for (std::size_t i = 0; i < children.size(); ++i) same = same && f.children[i].id == children[i];
            if (same) return &f;
        }
        return nullptr;
    }

    std::string add_fragment(WorkState& s, NodeKind kind, const std::vector<std::string>& children) const {
        if (const Node* f = find_fragment(s, kind, children)) return f->id;
        const bool is_and = kind == NodeKind::And;
        std::string id = fresh_name(prefix_ + (is_and ? "N" : "R") + std::to_string(is_and ? s.next_and : s.next_or),
                                    taken_names(s));
        (is_and ? s.next_and : s.next_or) += 1;
        Node n{id, kind, {}};
        const double w = 1.0 / static_cast<double>(children.size());
        for (const auto& c : children) n.children.push_back({c, w});
        s.fragments.push_back(std::move(n));
        return id;
    }

    std::vector<Candidate> candidates(const WorkState& state) const {
        std::vector<Candidate> out;

        // And fragments: adjacent pairs of the reduced corpus.
        std::set<std::pair<std::string, std::string>> pairs;
        for (const auto& [seq, n] : state.sequences)
            for (std::size_t i = 0; i + 1 < seq.size(); ++i) pairs.insert({seq[i], seq[i + 1]});
        for (const auto& [x, y] : pairs) {
            WorkState next = state;
            const std::string root = add_fragment(next, NodeKind::And, {x, y});
            SequenceCounts reduced;
            for (const auto& [seq, n] : state.sequences) {
                Sequence r;
                for (std::size_t i = 0; i < seq.size();) {
                    if (i + 1 < seq.size() && seq[i] == x && seq[i + 1] == y) {
                        r.push_back(root);
                        i += 2;
                    } else {
                        r.push_back(seq[i++]);
                    }
                }
                reduced[r] += n;
            }
            next.sequences = std::move(reduced);
            out.push_back({"and(" + x + "," + y + ")", std::move(next)});
        }

        // Or fragments: symbols filling the same slot of otherwise identical
        // sequences.
        std::map<std::pair<Sequence, std::size_t>, std::set<std::string>> slots;
        for (const auto& [seq, n] : state.sequences) {
            for (std::size_t i = 0; i < seq.size(); ++i) {
                Sequence masked = seq;
                masked[i].clear();
                slots[{std::move(masked), i}].insert(seq[i]);
            }
        }
        for (const auto& [slot, members] : slots) {
            if (members.size() < 2) continue;
            const auto& [masked, pos] = slot;
            const std::vector<std::string> children(members.begin(), members.end());
            WorkState next = state;
            const std::string root = add_fragment(next, NodeKind::Or, children);
            SequenceCounts reduced;
            for (const auto& [seq, n] : state.sequences) {
                Sequence r = seq;
                if (seq.size() == masked.size() && members.count(seq[pos])) {
                    Sequence m = seq;
                    m[pos].clear();
                    if (m == masked) r[pos] = root;
                }
                reduced[r] += n;
            }
            next.sequences = std::move(reduced);
            Sequence context = masked;
            context[pos] = "_";
            out.push_back({"or(" + join(children, '|') + ")@" + join(context, ' '), std::move(next)});
        }
        return out;
    }

    // Builds the grammar a work state denotes, with frequency-estimated
    // OR weights.
    Grammar realize(const WorkState& s) const {
        std::vector<Node> nodes;
        std::vector<Edge> start_children;
        const double total = static_cast<double>(corpus_.size());
        const SymbolSet taken = taken_names(s);
        std::map<std::string, const Node*> fragments;
        for (const auto& f : s.fragments) fragments.emplace(f.id, &f);

        if (s.sequences.size() == 1) {
            const Sequence& only = s.sequences.begin()->first;
            std::string start = start_name_;
            if (only.size() >= 2) {
                Node n{start_name_, NodeKind::And, {}};
                for (const auto& x : only) n.children.push_back({x, 1.0});
                nodes.push_back(std::move(n));
            } else if (fragments.count(only[0])) {
                start = only[0];
            } else {
                nodes.push_back({start_name_, NodeKind::Or, {{only[0], 1.0}}});
            }
            return finish(start, std::move(nodes), fragments);
        }

        int k = 1;
        for (const auto& [seq, n] : s.sequences) {
            const double w = static_cast<double>(n) / total;
            if (seq.size() == 1) {
                start_children.push_back({seq[0], w});
                continue;
            }
            std::string id = fresh_name(prefix_ + "P" + std::to_string(k++), taken);
            Node p{id, NodeKind::And, {}};
            for (const auto& x : seq) p.children.push_back({x, 1.0});
            nodes.push_back(std::move(p));
            start_children.push_back({id, w});
        }
        nodes.push_back({start_name_, NodeKind::Or, std::move(start_children)});
        return finish(start_name_, std::move(nodes), fragments);
    }

    Grammar finish(const std::string& start, std::vector<Node> nodes,
                   const std::map<std::string, const Node*>& fragments) const {
        // Keep only fragments still referenced.
        std::set<std::string> used;
        std::vector<std::string> stack;
        for (const auto& n : nodes)
            for (const auto& e : n.children) stack.push_back(e.id);
        stack.push_back(start);
        while (!stack.empty()) {
            auto id = stack.back();
            stack.pop_back();
            auto it = fragments.find(id);
            if (it == fragments.end() || !used.insert(id).second) continue;
            for (const auto& e : it->second->children) stack.push_back(e.id);
        }
        for (const auto& id : used) nodes.push_back(*fragments.at(id));
        Grammar g(layer_, start, terminals_, std::move(nodes));
        return estimate_or_probabilities(g, corpus_);
    }

    const Corpus& corpus_;
    const InductionConfig& config_;
    Layer layer_;
    SymbolSet terminals_;
    std::string start_name_;
    std::string prefix_;
};

}  // namespace

void require_valid(const InductionConfig& c) {
    if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) throw Error("invalid-config", "alpha must be positive");
    if (c.max_iterations < 1) throw Error("invalid-config", "max_iterations must be positive");
    if (!(c.min_posterior_gain >= 0.0)) throw Error("invalid-config", "min_posterior_gain must be non-negative");
    if (c.plateau_window < 1) throw Error("invalid-config", "plateau_window must be positive");
}

std::string Fragment::signature() const {
    return std::string(kind == NodeKind::Or ? "or(" : "and(") + join(children, kind == NodeKind::Or ? '|' : ',') + ")";
}

Grammar build_initial_grammar(const Corpus& corpus, Layer layer) {
    check_corpus(corpus);
    const SymbolSet terminals = corpus_symbols(corpus);
    const std::string tag(layer_tag(layer));
    SymbolSet taken = terminals;
    const std::string start = fresh_name(tag + "_ROOT", taken);
    taken.insert(start);

    const double total = static_cast<double>(corpus.size());
    std::vector<Node> nodes;
    Node root{start, NodeKind::Or, {}};
    int k = 1;
    for (const auto& [path, n] : path_histogram(corpus)) {
        const double w = static_cast<double>(n) / total;
        if (path.size() == 1) {
            root.children.push_back({path[0], w});
            continue;
        }
        std::string id = fresh_name(tag + "_P" + std::to_string(k++), taken);
        taken.insert(id);
        Node p{id, NodeKind::And, {}};
        for (const auto& x : path) p.children.push_back({x, 1.0});
        nodes.push_back(std::move(p));
        root.children.push_back({id, w});
    }
    nodes.push_back(std::move(root));
    return Grammar(layer, start, terminals, std::move(nodes));
}

std::vector<Fragment> enumerate_bigram_fragments(const Corpus& corpus) {
    check_corpus(corpus);
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& t : corpus)
        for (std::size_t i = 0; i + 1 < t.path.size(); ++i) pairs.insert({t.path[i], t.path[i + 1]});
    std::vector<Fragment> out;
    int k = 1;
    for (const auto& [x, y] : pairs) out.push_back({"B" + std::to_string(k++), NodeKind::And, {x, y}});
    return out;
}

double log_prior(const Grammar& grammar, const InductionConfig& config) {
    return -config.alpha * static_cast<double>(node_count(grammar));
}

double log_likelihood(const Grammar& grammar, const Corpus& corpus) {
    double total = 0.0;
    for (const auto& [path, n] : path_histogram(corpus)) {
        detail::SpanChart chart(grammar, path, detail::SpanChart::Mode::Sum);
        const double p = chart.total();
        if (!(p > 0.0)) return kNegInf;
        total += static_cast<double>(n) * std::log(p);
    }
    return total;
}

Grammar estimate_or_probabilities(const Grammar& grammar, const Corpus& corpus) {
    std::map<std::string, std::map<std::string, double>> counts;
    for (const auto& [path, n] : path_histogram(corpus)) {
        detail::SpanChart chart(grammar, path, detail::SpanChart::Mode::Max);
        if (!(chart.total() > 0.0)) {
            std::string shown;
            for (const auto& s : path) shown += s + " ";
            throw Error("underivable-corpus", "path [ " + shown + "] has no derivation");
        }
        chart.trace(grammar.start(), 0, path.size(),
                    [&](const std::string& or_id, const std::string& child, std::size_t) {
                        counts[or_id][child] += static_cast<double>(n);
                    });
    }
    std::vector<Node> nodes;
    for (const auto& [id, node] : grammar.nodes()) {
        Node m = node;
        if (m.kind == NodeKind::Or) {
            const auto it = counts.find(id);
            double total = 0.0;
            bool any_zero = false;
            if (it != counts.end()) {
                for (const auto& e : m.children) {
                    const auto c = it->second.find(e.id);
                    const double v = c == it->second.end() ? 0.0 : c->second;
                    total += v;
                    any_zero = any_zero || v == 0.0;
                }
            }
            const double k = static_cast<double>(m.children.size());
            for (auto& e : m.children) {
                if (total == 0.0) {
                    e.p = 1.0 / k;
                    continue;
                }
                const double v = it->second.count(e.id) ? it->second.at(e.id) : 0.0;
                // Unused alternatives keep a vanishing pseudo-count so every
                // OR edge stays a valid probability.
                e.p = any_zero ? (v + 1e-9 * total) / (total * (1.0 + 1e-9 * k)) : v / total;
            }
        }
        nodes.push_back(std::move(m));
    }
    return Grammar(grammar.layer(), grammar.start(), grammar.terminals(), std::move(nodes));
}

InductionResult induce(const Corpus& corpus, const InductionConfig& config, Layer layer) {
    check_corpus(corpus);
    require_valid(config);
    return Inducer(corpus, config, layer).run();
}

std::string iteration_log_csv(const std::vector<IterationRecord>& log) {
    std::ostringstream out;
    out << "iter,fragment,log_prior,log_likelihood,log_posterior\n";
    char buf[128];
    for (const auto& r : log) {
        std::string frag = r.fragment;
        if (frag.find_first_of(",\"") != std::string::npos) {
            std::string q = "\"";
            for (char c : frag) {
                if (c == '"') q += '"';
                q += c;
            }
            frag = q + "\"";
        }
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", r.log_prior, r.log_likelihood, r.log_posterior);
        out << r.iteration << ',' << frag << buf;
    }
    return out.str();
}

std::size_t fragment_count(const Grammar& grammar) {
    const std::size_t n = grammar.nodes().size();
    return grammar.find(grammar.start()) ? n - 1 : n;
}

Corpus segment_hops(const Corpus& corpus, std::size_t origin_len) {
    Corpus out;
    for (const auto& t : corpus) {
        if (t.path.size() <= origin_len)
            throw Error("empty-path", "record '" + t.id + "' has no hops after its origin");
        int k = 0;
        for (std::size_t i = origin_len; i < t.path.size(); i += 2) {
            Trace hop;
            hop.id = t.id + "#" + std::to_string(k++);
            hop.op = t.op;
            hop.path.push_back(t.path[i]);
            if (i + 1 < t.path.size()) hop.path.push_back(t.path[i + 1]);
            out.push_back(std::move(hop));
        }
    }
    return out;
}

namespace {

// Which start-level alternative the best derivation of `seq` goes through.
std::string top_choice(const Grammar& g, const std::vector<std::string>& seq) {
    const Node* start = g.find(g.start());
    if (!start || start->kind != NodeKind::Or) return g.start();
    detail::SpanChart chart(g, seq, detail::SpanChart::Mode::Max);
    if (!(chart.total() > 0.0)) throw Error("unparseable-trace", "sequence has no derivation");
    std::string chosen;
    chart.trace(g.start(), 0, seq.size(), [&](const std::string& or_id, const std::string& child, std::size_t) {
        if (chosen.empty() && or_id == g.start()) chosen = child;
    });
    return chosen;
}

}  // namespace

InductionResult induce_spatial(const Corpus& corpus, const InductionConfig& config, std::size_t origin_len) {
    const Corpus hops = segment_hops(corpus, origin_len);
    InductionResult result = induce(hops, config, Layer::Spatial);

    // Name micro-actions by the smallest hop each one derives.
    const Grammar& g = result.grammar;
    std::map<std::string, Sequence> first_hop;
    for (const auto& [hop, n] : path_histogram(hops)) {
        const auto action = top_choice(g, hop);
        if (!g.find(action)) continue;
        first_hop.emplace(action, hop);  // histogram order: first is smallest
    }
    std::vector<std::pair<Sequence, std::string>> order;
    for (const auto& [action, hop] : first_hop) order.push_back({hop, action});
    std::sort(order.begin(), order.end());

    SymbolSet taken = g.terminals();
    for (const auto& [id, n] : g.nodes()) taken.insert(id);
    std::map<std::string, std::string> renames;
    for (std::size_t k = 0; k < order.size(); ++k) {
        std::string name = "A" + std::to_string(k + 1);
        if (taken.count(name) && !first_hop.count(name)) name = fresh_name(name, taken);
        renames[order[k].second] = name;
    }
    // Rename through temporaries so swaps among existing A<k> ids are safe.
    std::map<std::string, std::string> stage1, stage2;
    for (const auto& [from, to] : renames) {
        const std::string tmp = fresh_name("~" + from, taken);
        stage1[from] = tmp;
        stage2[tmp] = to;
    }
    result.grammar = rename_nodes(rename_nodes(g, stage1), stage2);
    require_valid(result.grammar);
    return result;
}

std::string micro_action_of(const Grammar& spatial, const std::vector<std::string>& hop) {
    return top_choice(spatial, hop);
}

Corpus micro_action_corpus(const Grammar& spatial, const Corpus& corpus, std::size_t origin_len) {
    std::map<Sequence, std::string> cache;
    Corpus out;
    for (const auto& t : corpus) {
        Trace m{t.id, {}, t.features, t.op};
        for (const auto& hop : segment_hops(Corpus{t}, origin_len)) {
            auto it = cache.find(hop.path);
            if (it == cache.end()) it = cache.emplace(hop.path, micro_action_of(spatial, hop.path)).first;
            m.path.push_back(it->second);
        }
        out.push_back(std::move(m));
    }
    return out;
}

InductionResult induce_temporal(const Corpus& corpus, const Grammar& spatial, const InductionConfig& config,
                                std::size_t origin_len) {
    const Corpus actions = micro_action_corpus(spatial, corpus, origin_len);
    InductionResult result = induce(actions, config, Layer::Temporal);
    Grammar g = result.grammar;

    // Majority operation tag per top-level alternative.
    std::map<std::string, std::map<std::string, std::size_t>> tags;
    std::map<Sequence, std::string> cache;
    for (const auto& t : actions) {
        auto it = cache.find(t.path);
        if (it == cache.end()) it = cache.emplace(t.path, top_choice(g, t.path)).first;
        if (!t.op.empty()) ++tags[it->second][t.op];
    }
    std::map<std::string, std::string> label;
    std::set<std::string> used_labels;
    bool injective = !tags.empty();
    for (const auto& [alt, hist] : tags) {
        std::string best;
        std::size_t best_n = 0;
        for (const auto& [op, n] : hist)
            if (n > best_n) best = op, best_n = n;
        injective = injective && is_valid_symbol(best) && used_labels.insert(best).second;
        label[alt] = best;
    }
    if (!injective) return result;

    SymbolSet taken = g.terminals();
    for (const auto& [id, n] : g.nodes()) taken.insert(id);
    for (const auto& [alt, op] : label)
        if (taken.count(op) && !label.count(op)) return result;  // label would clash

    const Node* start = g.find(g.start());
    std::vector<Node> nodes;
    std::map<std::string, std::string> renames;
    for (const auto& [alt, op] : label)
        if (g.find(alt)) renames[alt] = op;
    if (start && start->kind == NodeKind::Or) {
        for (const auto& [id, n] : g.nodes()) {
            Node m = n;
            if (id == g.start()) {
                for (auto& e : m.children) {
                    auto l = label.find(e.id);
                    if (l == label.end()) continue;
                    if (g.is_terminal(e.id)) nodes.push_back({l->second, NodeKind::Or, {{e.id, 1.0}}});
                    e.id = l->second;
                }
            } else if (auto r = renames.find(id); r != renames.end()) {
                m.id = r->second;
            }
            for (auto& e : m.children)
                if (id != g.start())
                    if (auto r = renames.find(e.id); r != renames.end()) e.id = r->second;
            nodes.push_back(std::move(m));
        }
        g = Grammar(g.layer(), g.start(), g.terminals(), std::move(nodes));
    } else {
        // Single operation: the start itself becomes the operation node.
        const std::string op = label.begin()->second;
        const std::string root = fresh_name("T_ROOT", [&] {
            SymbolSet s = taken;
            s.insert(op);
            return s;
        }());
        g = rename_nodes(g, {{g.start(), op}});
        std::vector<Node> all;
        for (const auto& [id, n] : g.nodes()) all.push_back(n);
        all.push_back({root, NodeKind::Or, {{op, 1.0}}});
        g = Grammar(g.layer(), root, g.terminals(), std::move(all));
    }
    require_valid(g);
    result.grammar = std::move(g);
    result.fragment_count = fragment_count(result.grammar);
    return result;
}

}  // namespace stcaog
