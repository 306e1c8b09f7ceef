#include "stcaog/corpus.hpp"

#include <cctype>
#include <cstdio>
#include <istream>

#include "stcaog/error.hpp"

namespace stcaog {

bool NaturalLess::operator()(std::string_view a, std::string_view b) const {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
        const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
        if (da && db) {
            std::size_t ie = i, je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            auto na = a.substr(i, ie - i), nb = b.substr(j, je - j);
            while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
            while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
            if (na.size() != nb.size()) return na.size() < nb.size();
            if (na != nb) return na < nb;
            i = ie;
            j = je;
            continue;
        }
        if (a[i] != b[j]) return a[i] < b[j];
        ++i;
        ++j;
    }
    if (a.size() - i != b.size() - j) return a.size() - i < b.size() - j;
    return a < b;  // tie-break leading zeros deterministically
}

std::string feature_value_text(const FeatureValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(v));
    return buf;
}

bool is_numeric(const FeatureValue& v) { return std::holds_alternative<double>(v); }

std::map<std::vector<std::string>, std::size_t> path_histogram(const Corpus& corpus) {
    std::map<std::vector<std::string>, std::size_t> hist;
    for (const auto& t : corpus) ++hist[t.path];
    return hist;
}

nlohmann::json to_json(const Trace& trace) {
    nlohmann::json out = {{"id", trace.id}, {"path", trace.path}};
    if (!trace.op.empty()) out["op"] = trace.op;
    if (trace.features) {
        auto f = nlohmann::json::object();
        for (const auto& [k, v] : *trace.features) {
            if (is_numeric(v))
                f[k] = std::get<double>(v);
            else
                f[k] = std::get<std::string>(v);
        }
        out["features"] = std::move(f);
    }
    return out;
}

Trace trace_from_json(const nlohmann::json& doc) {
    try {
        Trace t;
        t.id = doc.at("id").get<std::string>();
        t.path = doc.at("path").get<std::vector<std::string>>();
        t.op = doc.value("op", std::string());
        if (doc.contains("features")) {
            FeatureRecord r;
            for (const auto& [k, v] : doc.at("features").items()) {
                if (v.is_number())
                    r[k] = v.get<double>();
                else
                    r[k] = v.get<std::string>();
            }
            t.features = std::move(r);
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed-corpus", e.what());
    }
}

Corpus corpus_from_jsonl(std::istream& in) {
    Corpus out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed-corpus", "line " + std::to_string(n) + ": " + e.what());
        }
        out.push_back(trace_from_json(doc));
    }
    return out;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& t : corpus) out += to_json(t).dump() + "\n";
    return out;
}

}  // namespace stcaog
