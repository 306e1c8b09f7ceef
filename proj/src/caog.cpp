#include "stcaog/caog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include "stcaog/error.hpp"

namespace stcaog {

namespace {

std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<std::string> feature_ids(const Dataset& data) {
    std::vector<std::string> out;
    for (const auto& [id, v] : data.front()) out.push_back(id);
    return out;
}

void check_complete(const Dataset& data, const std::string& intent) {
    if (data.size() < kMinRecords)
        throw Error("insufficient-data", "need at least " + std::to_string(kMinRecords) + " records, got " +
                                             std::to_string(data.size()));
    const auto ids = feature_ids(data);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!data[i].count(intent)) throw Error("missing-intent", "record " + std::to_string(i) + " lacks " + intent);
        if (data[i].size() != ids.size()) throw Error("incomplete-record", "record " + std::to_string(i));
        for (const auto& id : ids)
            if (!data[i].count(id))
                throw Error("incomplete-record", "record " + std::to_string(i) + " lacks " + id);
    }
}

bool all_numeric(const Dataset& data, const std::string& feature) {
    return std::all_of(data.begin(), data.end(), [&](const FeatureRecord& r) { return is_numeric(r.at(feature)); });
}

// Columns a feature contributes to the correlation estimator: the value
// itself when numeric, one indicator per distinct value otherwise.
std::vector<std::vector<double>> columns(const Dataset& data, const std::string& feature) {
    if (all_numeric(data, feature)) {
        std::vector<double> col;
        col.reserve(data.size());
        for (const auto& r : data) col.push_back(std::get<double>(r.at(feature)));
        return {col};
    }
    std::set<std::string> values;
    for (const auto& r : data) values.insert(feature_value_text(r.at(feature)));
    std::vector<std::vector<double>> out;
    for (const auto& v : values) {
        std::vector<double> col;
        col.reserve(data.size());
        for (const auto& r : data) col.push_back(feature_value_text(r.at(feature)) == v ? 1.0 : 0.0);
        out.push_back(std::move(col));
    }
    return out;
}

double abs_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return std::min(1.0, std::abs(sxy) / std::sqrt(sxx * syy));
}

double mutual_information(const std::vector<std::size_t>& x, const std::vector<std::size_t>& y) {
    std::map<std::pair<std::size_t, std::size_t>, double> joint;
    std::map<std::size_t, double> px, py;
    for (std::size_t i = 0; i < x.size(); ++i) {
        joint[{x[i], y[i]}] += 1.0;
        px[x[i]] += 1.0;
        py[y[i]] += 1.0;
    }
    const double n = static_cast<double>(x.size());
    double mi = 0.0;
    for (const auto& [xy, c] : joint) mi += (c / n) * std::log(c * n / (px[xy.first] * py[xy.second]));
    return std::max(0.0, mi);
}

std::vector<std::size_t> codes(const Dataset& data, const Discretization& d) {
    std::vector<std::size_t> out;
    out.reserve(data.size());
    for (const auto& r : data) out.push_back(d.index_of(r.at(d.feature)));
    return out;
}

// Held-out accuracy of a score-weighted vote of per-feature class tables.
double consistency(const Dataset& data, const std::string& intent, const std::vector<std::pair<std::string, double>>& scores,
                   int bins) {
    const auto target = discretize_feature(data, intent, bins);
    const auto y = codes(data, target);
    const std::size_t classes = target.symbols.size();
    auto is_test = [](std::size_t i) { return i % 5 == 4; };

    struct Table {
        double weight;
        std::vector<std::size_t> x;
        std::map<std::size_t, std::vector<double>> counts;
    };
    std::vector<Table> tables;
    for (const auto& [f, s] : scores) {
        if (!(s > 0.0)) continue;
        Table t{s, codes(data, discretize_feature(data, f, bins)), {}};
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (is_test(i)) continue;
            auto& row = t.counts[t.x[i]];
            row.resize(classes, 0.0);
            row[y[i]] += 1.0;
        }
        tables.push_back(std::move(t));
    }
    std::vector<double> prior(classes, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!is_test(i)) prior[y[i]] += 1.0;

    std::size_t tested = 0, correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!is_test(i)) continue;
        std::vector<double> vote(classes, 0.0);
        for (std::size_t c = 0; c < classes; ++c) vote[c] = 1e-12 * prior[c];
        for (const auto& t : tables) {
            auto it = t.counts.find(t.x[i]);
            if (it == t.counts.end()) continue;
            double total = 0.0;
            for (double v : it->second) total += v;
            for (std::size_t c = 0; c < classes; ++c)
                vote[c] += t.weight * (it->second[c] + 1.0) / (total + static_cast<double>(classes));
        }
        const auto best = static_cast<std::size_t>(std::max_element(vote.begin(), vote.end()) - vote.begin());
        ++tested;
        if (best == y[i]) ++correct;
    }
    return tested ? static_cast<double>(correct) / static_cast<double>(tested) : 0.0;
}

}  // namespace

std::string_view estimator_name(Estimator e) {
    return e == Estimator::AbsCorrelation ? "abs-correlation" : "mutual-information";
}

Estimator parse_estimator(std::string_view name) {
    if (name == "abs-correlation") return Estimator::AbsCorrelation;
    if (name == "mutual-information") return Estimator::MutualInformation;
    throw Error("invalid-config", "unknown estimator '" + std::string(name) + "'");
}

void require_valid(const CaogConfig& c) {
    if (c.top_k < 1) throw Error("invalid-config", "top_k must be at least 1");
    if (c.bins < 2) throw Error("invalid-config", "bins must be at least 2");
    if (c.max_depth < 1) throw Error("invalid-config", "max_depth must be at least 1");
    if (c.threshold && !std::isfinite(*c.threshold)) throw Error("invalid-config", "threshold must be finite");
}

std::vector<std::pair<std::string, double>> RelevanceScores::ranked() const {
    auto out = scores;
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

RelevanceScores relevance_scores(const Dataset& data, const std::string& intent, const CaogConfig& config) {
    require_valid(config);
    check_complete(data, intent);
    const auto target = discretize_feature(data, intent, config.bins);
    if (target.constant) throw Error("constant-intent", intent + " takes a single value");

    RelevanceScores out;
    out.intent = intent;
    out.estimator = config.estimator;
    if (config.estimator == Estimator::AbsCorrelation) {
        const auto ycols = columns(data, intent);
        for (const auto& f : feature_ids(data)) {
            if (f == intent) continue;
            double best = 0.0;
            for (const auto& xc : columns(data, f))
                for (const auto& yc : ycols) best = std::max(best, abs_pearson(xc, yc));
            out.scores.emplace_back(f, best);
        }
    } else {
        const auto y = codes(data, target);
        for (const auto& f : feature_ids(data)) {
            if (f == intent) continue;
            out.scores.emplace_back(f, mutual_information(codes(data, discretize_feature(data, f, config.bins)), y));
        }
    }
    out.consistency = consistency(data, intent, out.scores, config.bins);
    return out;
}

std::size_t Discretization::index_of(const FeatureValue& v) const {
    if (categorical) {
        const auto text = feature_value_text(v);
        const auto it = std::lower_bound(symbols.begin(), symbols.end(), text);
        if (it == symbols.end() || *it != text) throw Error("unknown-value", feature + " has no value '" + text + "'");
        return static_cast<std::size_t>(it - symbols.begin());
    }
    if (!is_numeric(v)) throw Error("unknown-value", feature + " expects a number");
    const double x = std::get<double>(v);
    return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

std::string Discretization::symbol_of(const FeatureValue& v) const { return symbols[index_of(v)]; }

Discretization discretize_feature(const Dataset& data, const std::string& feature, int bins) {
    if (bins < 2) throw Error("invalid-config", "bins must be at least 2");
    if (data.empty()) throw Error("insufficient-data", "empty dataset");
    for (const auto& r : data)
        if (!r.count(feature)) throw Error("missing-feature", feature + " absent from a record");

    Discretization d;
    d.feature = feature;
    if (!all_numeric(data, feature)) {
        d.categorical = true;
        std::set<std::string> values;
        for (const auto& r : data) values.insert(feature_value_text(r.at(feature)));
        d.symbols.assign(values.begin(), values.end());
        d.constant = d.symbols.size() == 1;
        return d;
    }

    std::vector<double> s;
    s.reserve(data.size());
    for (const auto& r : data) s.push_back(std::get<double>(r.at(feature)));
    std::sort(s.begin(), s.end());
    const double lo = s.front(), hi = s.back();
    if (lo == hi) {
        d.constant = true;
        d.symbols.push_back(short_number(lo));
        return d;
    }
    const std::size_t n = s.size();
    for (int i = 1; i < bins; ++i) {
        const std::size_t k = static_cast<std::size_t>(i) * n / static_cast<std::size_t>(bins);
        if (k == 0 || k >= n) continue;
        double cut = (s[k - 1] + s[k]) / 2.0;
        if (s[k - 1] == s[k]) {
            // Inside a run of ties: move the boundary just past the run.
            const auto next = std::upper_bound(s.begin(), s.end(), s[k]);
            if (next == s.end()) continue;
            cut = (s[k] + *next) / 2.0;
        }
        if (cut <= lo || cut > hi) continue;
        if (!d.cuts.empty() && cut <= d.cuts.back()) continue;
        d.cuts.push_back(cut);
    }
    for (std::size_t k = 0; k <= d.cuts.size(); ++k) {
        const double a = k == 0 ? lo : d.cuts[k - 1];
        const double b = k == d.cuts.size() ? hi : d.cuts[k];
        std::string name = feature + ":" + short_number(a) + ".." + short_number(b);
        // %.6g can merge close boundaries; keep names distinct.
        while (std::find(d.symbols.begin(), d.symbols.end(), name) != d.symbols.end()) name += "'";
        d.symbols.push_back(std::move(name));
    }
    return d;
}

Grammar build_caog(const Dataset& data, const std::string& intent, const CaogConfig& config) {
    require_valid(config);
    check_complete(data, intent);

    std::set<std::string> used = {intent};
    std::vector<Node> nodes;
    SymbolSet terminals;
    SymbolSet ids = {intent};

    auto select = [&](const std::string& target) {
        std::vector<std::string> out;
        RelevanceScores scores;
        try {
            scores = relevance_scores(data, target, config);
        } catch (const Error& e) {
            if (e.code() == "constant-intent") return out;
            throw;
        }
        for (const auto& [f, s] : scores.ranked()) {
            if (used.count(f) || !(s > 0.0)) continue;
            if (config.threshold ? s < *config.threshold && !out.empty()
                                 : out.size() >= static_cast<std::size_t>(config.top_k))
                break;
            out.push_back(f);
        }
        for (const auto& f : out) used.insert(f);
        std::sort(out.begin(), out.end(), NaturalLess{});  // children in feature order, not rank order
        return out;
    };

    auto value_node = [&](const std::string& id, const std::string& feature) {
        const auto d = discretize_feature(data, feature, config.bins);
        std::vector<double> counts(d.symbols.size(), 0.0);
        for (const auto& r : data) counts[d.index_of(r.at(feature))] += 1.0;
        Node n{id, NodeKind::Or, {}};
        for (std::size_t k = 0; k < d.symbols.size(); ++k) {
            if (counts[k] == 0.0) continue;
            std::string sym = d.symbols[k];
            if (ids.count(sym) || terminals.count(sym)) sym = feature + "=" + sym;
            terminals.insert(sym);
            n.children.push_back({sym, counts[k] / static_cast<double>(data.size())});
        }
        nodes.push_back(std::move(n));
    };

    std::function<void(const std::string&, int)> grow = [&](const std::string& feature, int depth) {
        const auto subs = depth < config.max_depth ? select(feature) : std::vector<std::string>{};
        if (subs.empty()) {
            value_node(feature, feature);
            return;
        }
        const std::string values = feature + ".v";
        ids.insert(values);
        Node n{feature, NodeKind::And, {{values, 1.0}}};
        for (const auto& s : subs) n.children.push_back({s, 1.0});
        nodes.push_back(std::move(n));
        value_node(values, feature);
        for (const auto& s : subs) grow(s, depth + 1);
    };

    const auto top = select(intent);
    if (top.empty()) throw Error("no-relevant-feature", "no feature depends on " + intent);
    for (const auto& f : top) ids.insert(f);
    if (top.size() == 1) {
        nodes.push_back({intent, NodeKind::Or, {{top[0], 1.0}}});
    } else {
        Node root{intent, NodeKind::And, {}};
        for (const auto& f : top) root.children.push_back({f, 1.0});
        nodes.push_back(std::move(root));
    }
    for (const auto& f : top) grow(f, 1);

    Grammar g(Layer::Causal, intent, std::move(terminals), std::move(nodes));
    require_valid(g);
    return g;
}

std::string relevance_csv(const RelevanceScores& scores) {
    std::ostringstream out;
    out << "feature,score,rank\n";
    const auto ranked = scores.ranked();
    char buf[64];
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", ranked[i].second);
        out << ranked[i].first << ',' << buf << ',' << (i + 1) << '\n';
    }
    return out.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            out.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    out.push_back(std::move(cell));
    return out;
}

FeatureValue parse_cell(const std::string& cell) {
    if (!cell.empty()) {
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() + cell.size() && std::isfinite(v)) return v;
    }
    return cell;
}

}  // namespace

Dataset dataset_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("malformed-dataset", "missing header");
    const auto header = split_csv_line(line);
    Dataset out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw Error("malformed-dataset", "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                                 " cells, expected " + std::to_string(header.size()));
        FeatureRecord r;
        for (std::size_t i = 0; i < cells.size(); ++i) r.emplace(header[i], parse_cell(cells[i]));
        out.push_back(std::move(r));
    }
    return out;
}

std::string dataset_to_csv(const Dataset& data) {
    std::ostringstream out;
    if (data.empty()) return "";
    bool first = true;
    for (const auto& [id, v] : data.front()) {
        out << (first ? "" : ",") << id;
        first = false;
    }
    out << '\n';
    for (const auto& r : data) {
        first = true;
        for (const auto& [id, v] : r) {
            out << (first ? "" : ",") << feature_value_text(v);
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace stcaog
