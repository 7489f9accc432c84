#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracklabel/features.hpp"

namespace tracklabel {

inline constexpr double kProbEpsilon = 1e-7;

enum class ParamsProvenance { synthetic_pretrain, pseudo_label_finetune, external };

std::string_view to_string(ParamsProvenance p);
ParamsProvenance params_provenance_from_string(std::string_view s);

// Logistic heads over NodeFeatures / EdgeFeatures. The last weight of each
// head is the bias.
struct ScorerParams {
    std::vector<double> node_weights = std::vector<double>(kNodeFeatureCount + 1, 0.0);
    std::vector<double> edge_weights = std::vector<double>(kEdgeFeatureCount + 1, 0.0);
    std::string version = "1";
    ParamsProvenance provenance = ParamsProvenance::external;

    friend bool operator==(const ScorerParams&, const ScorerParams&) = default;
};

// logistic(w . [x; 1]) clamped to [kProbEpsilon, 1 - kProbEpsilon].
// Throws ConfigError when weights.size() != x.size() + 1.
double logistic_score(std::span<const double> x, std::span<const double> weights);

double score_node(const NodeFeatures& f, const ScorerParams& p);
double score_edge(const EdgeFeatures& f, const ScorerParams& p);

// FNV-1a over the ordered feature names of both heads.
std::string feature_schema_hash();

// Text format:
//   tracklabel-scorer v1
//   schema <hash>
//   version <tag>
//   provenance <synthetic-pretrain|pseudo-label-finetune|external>
//   node <n>
//   <n weights, one per line>
//   edge <n>
//   <n weights>
std::string write_params(const ScorerParams& p);
// Throws ParseError on malformed input and ConfigError on a schema mismatch.
ScorerParams parse_params(std::istream& in);
ScorerParams read_params_file(const std::string& path);

}  // namespace tracklabel
