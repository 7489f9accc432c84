#include "tracklabel/assignment.hpp"

#include <algorithm>
#include <limits>

namespace tracklabel {

Matching max_weight_matching(const WeightMatrix& weights) {
    Matching result;
    const int rows = static_cast<int>(weights.size());
    int cols = 0;
    for (const auto& r : weights) cols = std::max(cols, static_cast<int>(r.size()));
    if (rows == 0 || cols == 0) return result;

    // Square minimisation problem; forbidden and non-positive pairs cost 0,
    // which is the same as leaving the row unmatched.
    const int n = std::max(rows, cols);
    auto cost = [&](int i, int j) -> double {
        if (i >= rows || j >= static_cast<int>(weights[i].size())) return 0.0;
        const auto& w = weights[i][j];
        return (w && *w > 0.0) ? -*w : 0.0;
    };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    for (int j = 1; j <= n; ++j) {
        const int i = p[j] - 1;
        const int c = j - 1;
        if (i < 0 || i >= rows || c >= static_cast<int>(weights[i].size())) continue;
        const auto& w = weights[i][c];
        if (w && *w > 0.0) {
            result.pairs.emplace_back(i, c);
            result.total += *w;
        }
    }
    std::sort(result.pairs.begin(), result.pairs.end());
    return result;
}

}  // namespace tracklabel
