#pragma once

#include <optional>
#include <utility>
#include <vector>

namespace tracklabel {

// Dense rectangular weight table; std::nullopt marks a pair that may not be
// matched.
using WeightMatrix = std::vector<std::vector<std::optional<double>>>;

struct Matching {
    std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
    double total = 0.0;
};

// Exact maximum-weight bipartite matching (Kuhn-Munkres, O(n^3)). Only pairs
// with a weight may be matched and every row/column is matched at most once.
// Pairs with weight <= 0 are never selected; the matching is not required to
// be perfect. Deterministic for a given matrix.
Matching max_weight_matching(const WeightMatrix& weights);

}  // namespace tracklabel
