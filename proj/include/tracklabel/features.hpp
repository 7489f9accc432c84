#pragma once

#include <array>
#include <span>
#include <vector>

#include "tracklabel/types.hpp"

namespace tracklabel {

inline constexpr std::size_t kNodeFeatureCount = 8;
inline constexpr std::size_t kEdgeFeatureCount = 8;

// [t/frame_count, x_center, y_center, w, h (all relative to the frame
// bounds, clamped to [0,1]), confidence, local density, max appearance
// similarity in frames t±1..t±5]
using NodeFeatures = std::array<double, kNodeFeatureCount>;

// [dt/span, |dx|/mean height, |dy|/mean height, |log w ratio|,
//  |log h ratio|, cosine distance (0.5 without embeddings), min confidence,
//  IoU of the motion-extrapolated earlier box with the later box]
using EdgeFeatures = std::array<double, kEdgeFeatureCount>;

const std::array<const char*, kNodeFeatureCount>& node_feature_names();
const std::array<const char*, kEdgeFeatureCount>& edge_feature_names();

struct FrameBounds {
    double left = 0.0;
    double top = 0.0;
    double width = 1920.0;
    double height = 1080.0;
};

inline constexpr int kAppearanceWindow = 5;

// Features for every candidate in `dets`; the density and appearance terms
// look only at the other entries of `dets`. The appearance term searches
// frames t-half_window..t+half_window.
std::vector<NodeFeatures> node_features(std::span<const Detection> dets, const FrameBounds& bounds,
                                        int frame_count, int half_window = kAppearanceWindow);

struct TimedBox {
    int frame = 0;
    Box box;
};

// What the edge scorer sees of a cluster: up to three members at each end,
// mean embedding and mean confidence.
struct ClusterSummary {
    int first_frame = 0;
    int last_frame = 0;
    std::vector<TimedBox> head;  // earliest members, ascending frame
    std::vector<TimedBox> tail;  // latest members, ascending frame
    std::vector<float> mean_embedding;
    double confidence = 0.0;
    std::size_t size = 0;
};

// `members` sorted by frame.
ClusterSummary summarize(std::span<const Detection* const> members);

// Least-squares centre velocity over the tail samples; zero for one sample.
std::array<double, 2> tail_velocity(const ClusterSummary& c);
Box extrapolate(const ClusterSummary& c, int frame);

// `earlier` must end before `later` starts.
EdgeFeatures edge_features(const ClusterSummary& earlier, const ClusterSummary& later, int span);

}  // namespace tracklabel
