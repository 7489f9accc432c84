#include "tracklabel/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tracklabel/geometry.hpp"

namespace tracklabel {

const std::array<const char*, kNodeFeatureCount>& node_feature_names() {
    static const std::array<const char*, kNodeFeatureCount> names = {
        "time", "center_x", "center_y", "width", "height", "confidence", "density", "max_appearance_sim"};
    return names;
}

const std::array<const char*, kEdgeFeatureCount>& edge_feature_names() {
    static const std::array<const char*, kEdgeFeatureCount> names = {
        "dt_over_span", "abs_dx_over_h", "abs_dy_over_h", "abs_log_w_ratio",
        "abs_log_h_ratio", "cosine_distance", "min_confidence", "extrapolated_iou"};
    return names;
}

std::vector<NodeFeatures> node_features(std::span<const Detection> dets, const FrameBounds& bounds,
                                        int frame_count, int half_window) {
    std::map<int, std::vector<std::size_t>> by_frame;
    for (std::size_t i = 0; i < dets.size(); ++i) by_frame[dets[i].frame].push_back(i);

    auto unit = [](double v) { return std::clamp(v, 0.0, 1.0); };
    std::vector<NodeFeatures> out(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const auto& d = dets[i];
        auto& f = out[i];
        f[0] = unit(static_cast<double>(d.frame) / std::max(1, frame_count));
        f[1] = unit((d.box.center_x() - bounds.left) / bounds.width);
        f[2] = unit((d.box.center_y() - bounds.top) / bounds.height);
        f[3] = unit(d.box.width / bounds.width);
        f[4] = unit(d.box.height / bounds.height);
        f[5] = d.confidence;

        const double radius = 2.0 * std::hypot(d.box.width, d.box.height);
        int neighbours = 0;
        for (std::size_t j : by_frame[d.frame]) {
            if (j == i) continue;
            const auto& o = dets[j].box;
            if (std::hypot(o.center_x() - d.box.center_x(), o.center_y() - d.box.center_y()) <= radius) ++neighbours;
        }
        f[6] = std::min(neighbours, 10) / 10.0;

        double best = 0.0;
        bool any = false;
        if (d.has_embedding()) {
            for (int dt = -half_window; dt <= half_window; ++dt) {
                if (dt == 0) continue;
                auto it = by_frame.find(d.frame + dt);
                if (it == by_frame.end()) continue;
                for (std::size_t j : it->second) {
                    if (!dets[j].has_embedding()) continue;
                    const double s = cosine_similarity(d.embedding, dets[j].embedding);
                    if (!any || s > best) best = s;
                    any = true;
                }
            }
        }
        f[7] = any ? best : 0.0;
    }
    return out;
}

ClusterSummary summarize(std::span<const Detection* const> members) {
    ClusterSummary s;
    if (members.empty()) return s;
    s.size = members.size();
    s.first_frame = members.front()->frame;
    s.last_frame = members.back()->frame;
    const std::size_t k = std::min<std::size_t>(3, members.size());
    for (std::size_t i = 0; i < k; ++i) s.head.push_back({members[i]->frame, members[i]->box});
    for (std::size_t i = members.size() - k; i < members.size(); ++i) s.tail.push_back({members[i]->frame, members[i]->box});

    std::vector<double> acc;
    double conf = 0.0;
    for (const auto* m : members) {
        conf += m->confidence;
        if (!m->has_embedding()) continue;
        if (acc.empty()) acc.assign(m->embedding.size(), 0.0);
        for (std::size_t i = 0; i < acc.size() && i < m->embedding.size(); ++i) acc[i] += m->embedding[i];
    }
    s.confidence = conf / static_cast<double>(members.size());
    if (!acc.empty()) {
        double n = 0.0;
        for (double v : acc) n += v * v;
        n = std::sqrt(n);
        if (n > 0.0) {
            s.mean_embedding.resize(acc.size());
            for (std::size_t i = 0; i < acc.size(); ++i) s.mean_embedding[i] = static_cast<float>(acc[i] / n);
        }
    }
    return s;
}

std::array<double, 2> tail_velocity(const ClusterSummary& c) {
    if (c.tail.size() < 2) return {0.0, 0.0};
    double mt = 0.0, mx = 0.0, my = 0.0;
    for (const auto& s : c.tail) {
        mt += s.frame;
        mx += s.box.center_x();
        my += s.box.center_y();
    }
    const double n = static_cast<double>(c.tail.size());
    mt /= n;
    mx /= n;
    my /= n;
    double stt = 0.0, stx = 0.0, sty = 0.0;
    for (const auto& s : c.tail) {
        const double dt = s.frame - mt;
        stt += dt * dt;
        stx += dt * (s.box.center_x() - mx);
        sty += dt * (s.box.center_y() - my);
    }
    if (stt <= 0.0) return {0.0, 0.0};
    return {stx / stt, sty / stt};
}

Box extrapolate(const ClusterSummary& c, int frame) {
    const auto& last = c.tail.back();
    const auto v = tail_velocity(c);
    const double dt = frame - last.frame;
    Box b = last.box;
    b.left += v[0] * dt;
    b.top += v[1] * dt;
    return b;
}

EdgeFeatures edge_features(const ClusterSummary& earlier, const ClusterSummary& later, int span) {
    const Box& a = earlier.tail.back().box;
    const Box& b = later.head.front().box;
    const double dt = later.first_frame - earlier.last_frame;
    const double mean_h = 0.5 * (a.height + b.height);
    EdgeFeatures f{};
    f[0] = dt / std::max(1, span);
    f[1] = std::abs(b.center_x() - a.center_x()) / mean_h;
    f[2] = std::abs(b.center_y() - a.center_y()) / mean_h;
    f[3] = std::abs(std::log(b.width / a.width));
    f[4] = std::abs(std::log(b.height / a.height));
    if (!earlier.mean_embedding.empty() && !later.mean_embedding.empty())
        f[5] = 1.0 - cosine_similarity(earlier.mean_embedding, later.mean_embedding);
    else
        f[5] = 0.5;
    f[6] = std::min(earlier.confidence, later.confidence);
    f[7] = iou(extrapolate(earlier, later.first_frame), b);
    return f;
}

}  // namespace tracklabel
