#pragma once

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tracklabel/features.hpp"
#include "tracklabel/scorer.hpp"
#include "tracklabel/types.hpp"

namespace tracklabel {

struct HierarchyConfig {
    int clip_length = 512;
    int node_level_window = 10;
    std::vector<int> edge_level_spans = {2, 4, 8, 16, 32, 64, 128, 256, 512};
    int k = 10;
    double node_accept_threshold = 0.5;
    int max_interp_gap = 8;

    // Throws ConfigError.
    void validate() const;
    // Node level plus one level per span.
    int level_count() const { return 1 + static_cast<int>(edge_level_spans.size()); }
};

enum class NodeClamp { none, forced_valid, forced_invalid };
enum class EdgeClamp { none, forced_on, forced_off };

std::string_view to_string(NodeClamp c);
std::string_view to_string(EdgeClamp c);
NodeClamp node_clamp_from_string(std::string_view s);
EdgeClamp edge_clamp_from_string(std::string_view s);

// Hard constraints from annotator decisions. Node clamps are keyed by det_id;
// edge clamps by the unordered pair of cluster ids (a cluster id is its
// lowest member det_id). An edge clamp keeps applying at deeper levels to
// any pair of clusters that contain its two ids.
class ClampSet {
public:
    struct NodeRecord {
        NodeClamp state = NodeClamp::none;
        std::string response_id;
        friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
    };
    struct EdgeRecord {
        EdgeClamp state = EdgeClamp::none;
        std::string response_id;
        friend bool operator==(const EdgeRecord&, const EdgeRecord&) = default;
    };
    using EdgeKey = std::pair<DetId, DetId>;  // (low, high)

    // Setting the state a target already has is a no-op; the opposite state
    // throws ConflictError naming both responses.
    void set_node(DetId id, NodeClamp state, const std::string& response_id);
    void set_edge(DetId a, DetId b, EdgeClamp state, const std::string& response_id);

    // Raises ConflictError if set_node/set_edge would.
    void check_node(DetId id, NodeClamp state) const;
    void check_edge(DetId a, DetId b, EdgeClamp state) const;

    NodeClamp node(DetId id) const;
    EdgeClamp edge(DetId a, DetId b) const;

    const std::map<DetId, NodeRecord>& nodes() const { return nodes_; }
    const std::map<EdgeKey, EdgeRecord>& edges() const { return edges_; }
    bool empty() const { return nodes_.empty() && edges_.empty(); }

    friend bool operator==(const ClampSet&, const ClampSet&) = default;

    static EdgeKey key(DetId a, DetId b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

private:
    std::map<DetId, NodeRecord> nodes_;
    std::map<EdgeKey, EdgeRecord> edges_;
};

using DetectionIndex = std::unordered_map<DetId, const Detection*>;
DetectionIndex index_detections(std::span<const Detection> dets);

struct Cluster {
    DetId id = 0;  // lowest member det_id
    int level = 0;
    std::vector<DetId> members;  // ascending frame
    int first_frame = 0;
    int last_frame = 0;
    ClusterSummary summary;
};

// Builds a cluster from det_ids (any order). Throws DomainError if two
// members share a frame.
Cluster make_cluster(std::vector<DetId> members, int level, const DetectionIndex& index);

struct ScoredNode {
    DetId det_id = 0;
    int frame = 0;
    NodeFeatures features{};
    double score = 0.5;
    NodeClamp clamp = NodeClamp::none;
    bool accepted = false;
};

struct LevelEdge {
    DetId earlier = 0;  // cluster id in the left half
    DetId later = 0;    // cluster id in the right half
    int window = 0;
    EdgeFeatures features{};
    double score = 0.5;
    EdgeClamp clamp = EdgeClamp::none;
    bool selected = false;
};

struct LevelGraph {
    int level = 1;
    int span = 2;
    int clip_first = 1;
    std::vector<Cluster> nodes;  // level-(l-1) clusters, sorted by id
    std::vector<LevelEdge> edges;  // sorted by (window, earlier, later)

    const Cluster* find(DetId cluster_id) const;
    // Window index and side (0 left, 1 right) of a cluster.
    std::pair<int, int> place(const Cluster& c) const;
};

struct Clip {
    int first_frame = 1;
    int last_frame = 1;
};

// Consecutive non-overlapping clips of clip_length frames; the last may be
// shorter. Empty for a sequence with no frames.
std::vector<Clip> split_clips(int frame_count, const HierarchyConfig& cfg);

struct SolveContext {
    FrameBounds bounds;
    int frame_count = 1;
};

SolveContext context_for(const Sequence& seq);

// Node level: a node is accepted iff clamped forced-valid, or unclamped with
// score >= node_accept_threshold.
std::vector<ScoredNode> validate_nodes(std::span<const Detection> clip_dets, const ScorerParams& params,
                                       const HierarchyConfig& cfg, const ClampSet& clamps,
                                       const SolveContext& ctx);

// Singleton clusters of the accepted nodes.
std::vector<Cluster> initial_clusters(std::span<const ScoredNode> nodes, const DetectionIndex& index);

// Candidate edges between the two halves of every span-wide window. Members
// clamped forced-invalid are pruned from the input clusters first.
LevelGraph build_level_graph(const std::vector<Cluster>& clusters, int level, int span, int clip_first,
                             const ScorerParams& params, int k, const ClampSet& clamps,
                             const DetectionIndex& index);

struct LevelSolution {
    std::vector<Cluster> clusters;  // level-l clusters, sorted by id
    double objective = 0.0;         // sum of log-odds over selected unclamped edges
};

// Exact per-window assignment. Marks the selected edges in `graph`. Throws
// ConflictError when two forced-on edges share an endpoint.
LevelSolution solve_level(LevelGraph& graph, const DetectionIndex& index);

struct HierarchyResult {
    Clip clip;
    std::vector<ScoredNode> nodes;
    std::vector<LevelGraph> levels;
    std::vector<Cluster> clusters;  // top level
};

HierarchyResult solve_hierarchy(std::span<const Detection> clip_dets, const Clip& clip, const ScorerParams& params,
                                const HierarchyConfig& cfg, const ClampSet& clamps, const SolveContext& ctx,
                                const DetectionIndex& index);

// Joins trajectories of adjacent clips with one more bipartite matching
// using the solve_level rules. Returns sequence-level clusters.
std::vector<Cluster> link_clips(const std::vector<std::vector<Cluster>>& per_clip, const ScorerParams& params,
                                const HierarchyConfig& cfg, const ClampSet& clamps, const DetectionIndex& index);

// Track ids ascend by (first frame, first det_id).
std::vector<Trajectory> to_trajectories(const std::vector<Cluster>& clusters, const DetectionIndex& index);

// One entry per member (provenance human for annotator-refined boxes, else
// pseudo); intra-track gaps of at most max_gap frames are filled by linear
// interpolation. max_gap = 0 disables filling.
LabelSet extract_labels(const std::vector<Cluster>& clusters, const DetectionIndex& index, const std::string& seq_id,
                        int max_gap);

struct SequenceSolution {
    std::vector<HierarchyResult> clips;
    std::vector<Cluster> clusters;
    LabelSet labels;
};

// Split, solve every clip, link and extract.
SequenceSolution solve_sequence(const Sequence& seq, const ScorerParams& params, const HierarchyConfig& cfg,
                                const ClampSet& clamps);

// Detections with confidence >= threshold, order preserved.
Sequence admit(const Sequence& seq, double threshold);

std::string dump_state(const std::vector<HierarchyResult>& clips);

}  // namespace tracklabel
