#include "tracklabel/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tracklabel/error.hpp"

namespace tracklabel {

std::string_view to_string(ParamsProvenance p) {
    switch (p) {
        case ParamsProvenance::synthetic_pretrain: return "synthetic-pretrain";
        case ParamsProvenance::pseudo_label_finetune: return "pseudo-label-finetune";
        case ParamsProvenance::external: return "external";
    }
    return "external";
}

ParamsProvenance params_provenance_from_string(std::string_view s) {
    if (s == "synthetic-pretrain") return ParamsProvenance::synthetic_pretrain;
    if (s == "pseudo-label-finetune") return ParamsProvenance::pseudo_label_finetune;
    if (s == "external") return ParamsProvenance::external;
    throw ConfigError("unknown params provenance '" + std::string(s) + "'");
}

double logistic_score(std::span<const double> x, std::span<const double> weights) {
    if (weights.size() != x.size() + 1)
        throw ConfigError("scorer dimension mismatch: " + std::to_string(x.size()) + " features, " +
                          std::to_string(weights.size()) + " weights");
    double z = weights.back();
    for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
    const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

double score_node(const NodeFeatures& f, const ScorerParams& p) { return logistic_score(f, p.node_weights); }
double score_edge(const EdgeFeatures& f, const ScorerParams& p) { return logistic_score(f, p.edge_weights); }

std::string feature_schema_hash() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    feed("node");
    for (const char* n : node_feature_names()) feed(n);
    feed("edge");
    for (const char* n : edge_feature_names()) feed(n);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string write_params(const ScorerParams& p) {
    std::string out = "tracklabel-scorer v1\nschema " + feature_schema_hash() + "\nversion " + p.version +
                      "\nprovenance " + std::string(to_string(p.provenance)) + "\n";
    char buf[64];
    auto head = [&](const char* name, const std::vector<double>& w) {
        out += name;
        out += ' ' + std::to_string(w.size()) + '\n';
        for (double v : w) {
            std::snprintf(buf, sizeof buf, "%.17g\n", v);
            out += buf;
        }
    };
    head("node", p.node_weights);
    head("edge", p.edge_weights);
    return out;
}

ScorerParams parse_params(std::istream& in) {
    std::string line;
    int line_no = 0;
    auto next = [&]() -> std::string {
        if (!std::getline(in, line)) throw ParseError("unexpected end of scorer file", line_no + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    auto field = [&](const std::string& key) {
        const std::string l = next();
        if (l.rfind(key + " ", 0) != 0) throw ParseError("expected '" + key + "'", line_no);
        return l.substr(key.size() + 1);
    };
    if (next() != "tracklabel-scorer v1") throw ParseError("not a tracklabel scorer file", line_no);
    const std::string schema = field("schema");
    if (schema != feature_schema_hash())
        throw ConfigError("scorer schema mismatch: file " + schema + ", expected " + feature_schema_hash());
    ScorerParams p;
    p.version = field("version");
    p.provenance = params_provenance_from_string(field("provenance"));
    auto head = [&](const std::string& name, std::vector<double>& w, std::size_t expected) {
        std::size_t n = 0;
        try {
            n = std::stoul(field(name));
        } catch (const std::invalid_argument&) {
            throw ParseError("bad weight count", line_no);
        }
        if (n != expected) throw ConfigError(name + " head has " + std::to_string(n) + " weights, expected " +
                                             std::to_string(expected));
        w.assign(n, 0.0);
        for (auto& v : w) {
            const std::string s = next();
            char* end = nullptr;
            v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) throw ParseError("bad weight '" + s + "'", line_no);
        }
    };
    head("node", p.node_weights, kNodeFeatureCount + 1);
    head("edge", p.edge_weights, kEdgeFeatureCount + 1);
    return p;
}

ScorerParams read_params_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open scorer file " + path);
    return parse_params(in);
}

}  // namespace tracklabel
