#include "tracklabel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "tracklabel/assignment.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/geometry.hpp"

namespace tracklabel {

double hota_alpha(int index) { return static_cast<double>(index + 1) / 20.0; }

FrameMatch match_frame(std::span<const Box> pred, std::span<const Box> gt, double alpha) {
    FrameMatch out;
    if (pred.empty() || gt.empty()) return out;
    const double big = static_cast<double>(std::min(pred.size(), gt.size())) + 1.0;
    WeightMatrix w(gt.size(), std::vector<std::optional<double>>(pred.size()));
    std::vector<std::vector<double>> ious(gt.size(), std::vector<double>(pred.size()));
    bool any = false;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        for (std::size_t p = 0; p < pred.size(); ++p) {
            const double v = iou(gt[g], pred[p]);
            ious[g][p] = v;
            if (v >= alpha && v > 0.0) {
                w[g][p] = big + v;
                any = true;
            }
        }
    }
    if (!any) return out;
    const auto m = max_weight_matching(w);
    out.pairs = m.pairs;
    for (const auto& [g, p] : m.pairs) out.total_iou += ious[g][p];
    return out;
}

namespace {

struct FrameData {
    std::vector<TrackId> gt_ids;
    std::vector<Box> gt_boxes;
    std::vector<TrackId> pred_ids;
    std::vector<Box> pred_boxes;
};

struct EvalData {
    std::map<int, FrameData> frames;
    long gt_total = 0;
    long pred_total = 0;
};

EvalData prepare(const LabelSet& pred, const LabelSet& gt) {
    struct Raw {
        std::vector<const LabelEntry*> gt;
        std::vector<const LabelEntry*> pred;
    };
    std::map<int, Raw> raw;
    for (const auto& e : gt.entries) raw[e.frame].gt.push_back(&e);
    for (const auto& e : pred.entries) raw[e.frame].pred.push_back(&e);

    auto by_id = [](const LabelEntry* a, const LabelEntry* b) { return a->track_id < b->track_id; };
    EvalData data;
    for (auto& [frame, r] : raw) {
        std::sort(r.gt.begin(), r.gt.end(), by_id);
        std::sort(r.pred.begin(), r.pred.end(), by_id);
        std::vector<char> drop(r.pred.size(), 0);
        const bool has_distractor =
            std::any_of(r.gt.begin(), r.gt.end(), [](const LabelEntry* e) { return !e->evaluable; });
        if (has_distractor && !r.pred.empty()) {
            std::vector<Box> gb, pb;
            for (const auto* e : r.gt) gb.push_back(e->box);
            for (const auto* e : r.pred) pb.push_back(e->box);
            for (const auto& [g, p] : match_frame(pb, gb, 0.5).pairs)
                if (!r.gt[g]->evaluable) drop[p] = 1;
        }
        FrameData fd;
        for (const auto* e : r.gt) {
            if (!e->evaluable) continue;
            fd.gt_ids.push_back(e->track_id);
            fd.gt_boxes.push_back(e->box);
        }
        for (std::size_t i = 0; i < r.pred.size(); ++i) {
            if (drop[i]) continue;
            fd.pred_ids.push_back(r.pred[i]->track_id);
            fd.pred_boxes.push_back(r.pred[i]->box);
        }
        data.gt_total += static_cast<long>(fd.gt_ids.size());
        data.pred_total += static_cast<long>(fd.pred_ids.size());
        data.frames.emplace(frame, std::move(fd));
    }
    if (data.gt_total == 0) throw DomainError("metrics undefined: no evaluable ground-truth boxes");
    return data;
}

double mota_impl(const EvalData& data, ClearCounts* counts) {
    ClearCounts c;
    c.gt_count = data.gt_total;
    std::map<TrackId, TrackId> last_match;
    for (const auto& [frame, fd] : data.frames) {
        const auto m = match_frame(fd.pred_boxes, fd.gt_boxes, 0.5);
        c.tp += static_cast<long>(m.pairs.size());
        for (const auto& [g, p] : m.pairs) {
            const TrackId gid = fd.gt_ids[g];
            const TrackId pid = fd.pred_ids[p];
            auto it = last_match.find(gid);
            if (it != last_match.end() && it->second != pid) ++c.idsw;
            last_match[gid] = pid;
        }
    }
    c.fn = data.gt_total - c.tp;
    c.fp = data.pred_total - c.tp;
    if (counts) *counts = c;
    return 1.0 - static_cast<double>(c.fn + c.fp + c.idsw) / static_cast<double>(data.gt_total);
}

double idf1_impl(const EvalData& data, IdentityCounts* counts) {
    std::map<TrackId, int> gt_index, pred_index;
    for (const auto& [frame, fd] : data.frames) {
        for (auto id : fd.gt_ids) gt_index.emplace(id, 0);
        for (auto id : fd.pred_ids) pred_index.emplace(id, 0);
    }
    int k = 0;
    for (auto& [id, idx] : gt_index) idx = k++;
    k = 0;
    for (auto& [id, idx] : pred_index) idx = k++;

    std::vector<std::vector<long>> overlap(gt_index.size(), std::vector<long>(pred_index.size(), 0));
    for (const auto& [frame, fd] : data.frames) {
        for (std::size_t g = 0; g < fd.gt_ids.size(); ++g)
            for (std::size_t p = 0; p < fd.pred_ids.size(); ++p)
                if (iou(fd.gt_boxes[g], fd.pred_boxes[p]) >= 0.5)
                    ++overlap[gt_index[fd.gt_ids[g]]][pred_index[fd.pred_ids[p]]];
    }
    WeightMatrix w(gt_index.size(), std::vector<std::optional<double>>(pred_index.size()));
    for (std::size_t g = 0; g < overlap.size(); ++g)
        for (std::size_t p = 0; p < overlap[g].size(); ++p)
            if (overlap[g][p] > 0) w[g][p] = static_cast<double>(overlap[g][p]);
    IdentityCounts c;
    for (const auto& [g, p] : max_weight_matching(w).pairs) c.idtp += overlap[g][p];
    c.idfn = data.gt_total - c.idtp;
    c.idfp = data.pred_total - c.idtp;
    if (counts) *counts = c;
    const double denom = 2.0 * c.idtp + c.idfp + c.idfn;
    return denom > 0.0 ? 2.0 * c.idtp / denom : 0.0;
}

HotaResult hota_impl(const EvalData& data) {
    std::map<TrackId, long> gt_count, pred_count;
    for (const auto& [frame, fd] : data.frames) {
        for (auto id : fd.gt_ids) ++gt_count[id];
        for (auto id : fd.pred_ids) ++pred_count[id];
    }
    HotaResult r;
    for (int a = 0; a < kAlphaCount; ++a) {
        const double alpha = hota_alpha(a);
        std::map<std::pair<TrackId, TrackId>, long> pair_tp;
        long tp = 0;
        for (const auto& [frame, fd] : data.frames) {
            for (const auto& [g, p] : match_frame(fd.pred_boxes, fd.gt_boxes, alpha).pairs) {
                ++pair_tp[{fd.gt_ids[g], fd.pred_ids[p]}];
                ++tp;
            }
        }
        double ass_sum = 0.0;
        for (const auto& [key, n] : pair_tp) {
            const double tpa = static_cast<double>(n);
            const double denom = static_cast<double>(gt_count[key.first] + pred_count[key.second]) - tpa;
            ass_sum += tpa * (tpa / denom);
        }
        const double det = static_cast<double>(tp) / static_cast<double>(data.gt_total + data.pred_total - tp);
        const double ass = tp > 0 ? ass_sum / static_cast<double>(tp) : 0.0;
        r.deta[a] = det;
        r.assa[a] = ass;
        r.hota[a] = std::sqrt(det * ass);
    }
    for (int a = 0; a < kAlphaCount; ++a) {
        r.hota_mean += r.hota[a];
        r.deta_mean += r.deta[a];
        r.assa_mean += r.assa[a];
    }
    r.hota_mean /= kAlphaCount;
    r.deta_mean /= kAlphaCount;
    r.assa_mean /= kAlphaCount;
    return r;
}

}  // namespace

double mota(const LabelSet& pred, const LabelSet& gt, ClearCounts* counts) {
    return mota_impl(prepare(pred, gt), counts);
}

double idf1(const LabelSet& pred, const LabelSet& gt, IdentityCounts* counts) {
    return idf1_impl(prepare(pred, gt), counts);
}

HotaResult hota(const LabelSet& pred, const LabelSet& gt) { return hota_impl(prepare(pred, gt)); }

MetricsReport evaluate(const LabelSet& pred, const LabelSet& gt) {
    const auto data = prepare(pred, gt);
    MetricsReport rep;
    rep.hota_detail = hota_impl(data);
    rep.hota = rep.hota_detail.hota_mean;
    rep.deta = rep.hota_detail.deta_mean;
    rep.assa = rep.hota_detail.assa_mean;
    rep.mota = mota_impl(data, &rep.clear);
    rep.idf1 = idf1_impl(data, &rep.identity);
    return rep;
}

std::string MetricsReport::to_text() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "HOTA %.3f  DetA %.3f  AssA %.3f  MOTA %.3f  IDF1 %.3f\n"
                  "TP %ld  FP %ld  FN %ld  IDSW %ld  GT %ld\n"
                  "clicks %ld  budget fraction %.4f\n",
                  100.0 * hota, 100.0 * deta, 100.0 * assa, 100.0 * mota, 100.0 * idf1, clear.tp, clear.fp,
                  clear.fn, clear.idsw, clear.gt_count, clicks, budget_fraction);
    return buf;
}

}  // namespace tracklabel
