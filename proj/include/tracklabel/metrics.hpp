#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tracklabel/types.hpp"

namespace tracklabel {

inline constexpr int kAlphaCount = 19;
// 0.05, 0.10, ..., 0.95
double hota_alpha(int index);

struct FrameMatch {
    std::vector<std::pair<int, int>> pairs;  // (gt index, pred index)
    double total_iou = 0.0;
};

// Maximum-cardinality, then maximum-total-IoU one-to-one matching among
// pairs with IoU >= alpha. Inputs are expected in (id) order; ties resolve
// towards lower gt index, then lower pred index.
FrameMatch match_frame(std::span<const Box> pred, std::span<const Box> gt, double alpha);

struct ClearCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long idsw = 0;
    long gt_count = 0;
};

struct IdentityCounts {
    long idtp = 0;
    long idfp = 0;
    long idfn = 0;
};

struct HotaResult {
    std::array<double, kAlphaCount> hota{};
    std::array<double, kAlphaCount> deta{};
    std::array<double, kAlphaCount> assa{};
    double hota_mean = 0.0;
    double deta_mean = 0.0;
    double assa_mean = 0.0;
};

struct MetricsReport {
    double hota = 0.0;
    double deta = 0.0;
    double assa = 0.0;
    HotaResult hota_detail;
    double mota = 0.0;
    double idf1 = 0.0;
    ClearCounts clear;
    IdentityCounts identity;
    long clicks = 0;
    double budget_fraction = 0.0;

    std::string to_text() const;
};

double mota(const LabelSet& pred, const LabelSet& gt, ClearCounts* counts = nullptr);
double idf1(const LabelSet& pred, const LabelSet& gt, IdentityCounts* counts = nullptr);
HotaResult hota(const LabelSet& pred, const LabelSet& gt);

// All three metrics. Predictions matched (IoU >= 0.5) to non-evaluable
// ground truth are dropped first, then non-evaluable ground truth is
// removed. Throws DomainError when no evaluable ground truth remains.
MetricsReport evaluate(const LabelSet& pred, const LabelSet& gt);

}  // namespace tracklabel
