#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tracklabel/engine.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/hierarchy.hpp"
#include "tracklabel/metrics.hpp"
#include "tracklabel/mot_io.hpp"
#include "tracklabel/synthgen.hpp"
#include "tracklabel/training.hpp"

using namespace tracklabel;

namespace {

Detection det(DetId id, int frame, Box b, DetectionSource src = DetectionSource::detector) {
    Detection d;
    d.det_id = id;
    d.frame = frame;
    d.box = b;
    d.confidence = 0.9;
    d.source = src;
    return d;
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Hand-built level-1 graph: left clusters in frame 1, right in frame 2.
struct TinyLevel {
    std::vector<Detection> dets;
    DetectionIndex index;
    LevelGraph graph;

    TinyLevel(int left, int right) {
        for (int i = 0; i < left; ++i) dets.push_back(det(1 + i, 1, Box{100.0 * i, 0, 40, 100}));
        for (int j = 0; j < right; ++j) dets.push_back(det(101 + j, 2, Box{100.0 * j, 0, 40, 100}));
        index = index_detections(dets);
        graph.level = 1;
        graph.span = 2;
        graph.clip_first = 1;
        for (const auto& d : dets) graph.nodes.push_back(make_cluster({d.det_id}, 0, index));
    }
    void edge(DetId a, DetId b, double score, EdgeClamp clamp = EdgeClamp::none) {
        LevelEdge e;
        e.earlier = a;
        e.later = b;
        e.score = score;
        e.clamp = clamp;
        graph.edges.push_back(e);
    }
};

// Shared trained scorer for the clean-world tests.
const ScorerParams& clean_params() {
    static const ScorerParams p = [] {
        WorldConfig w;
        w.seed = 31;
        w.fp_rate = 0.1;
        const auto seq = generate(w);
        return pretrain({&seq, 1}, HierarchyConfig{}, TrainOptions{}, 0.0).params;
    }();
    return p;
}

WorldConfig clean_world(std::uint64_t seed) {
    WorldConfig w;
    w.seed = seed;
    w.conf_noise = 0.0;
    return w;
}

}  // namespace

TEST(Clips, Split) {
    HierarchyConfig h;
    auto c = split_clips(1024, h);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].last_frame - c[0].first_frame + 1, 512);
    EXPECT_EQ(c[1].last_frame - c[1].first_frame + 1, 512);
    c = split_clips(600, h);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].first_frame, 1);
    EXPECT_EQ(c[0].last_frame, 512);
    EXPECT_EQ(c[1].first_frame, 513);
    EXPECT_EQ(c[1].last_frame, 600);
    EXPECT_EQ(split_clips(10, h).size(), 1u);
    EXPECT_TRUE(split_clips(0, h).empty());
}

TEST(HierarchyConfig, Validation) {
    HierarchyConfig h;
    EXPECT_NO_THROW(h.validate());
    h.edge_level_spans = {2, 3};
    EXPECT_THROW(h.validate(), ConfigError);
    h = HierarchyConfig{};
    h.k = 0;
    EXPECT_THROW(h.validate(), ConfigError);
}

TEST(Clamps, SameStateIsNoOpOppositeConflicts) {
    ClampSet c;
    c.set_node(5, NodeClamp::forced_valid, "q1");
    EXPECT_NO_THROW(c.set_node(5, NodeClamp::forced_valid, "q2"));
    EXPECT_EQ(c.nodes().at(5).response_id, "q1");
    EXPECT_THROW(c.set_node(5, NodeClamp::forced_invalid, "q3"), ConflictError);
    EXPECT_EQ(c.node(5), NodeClamp::forced_valid);

    c.set_edge(9, 3, EdgeClamp::forced_off, "q4");
    EXPECT_EQ(c.edge(3, 9), EdgeClamp::forced_off);
    EXPECT_THROW(c.check_edge(3, 9, EdgeClamp::forced_on), ConflictError);
    EXPECT_NO_THROW(c.check_edge(3, 9, EdgeClamp::forced_off));
    EXPECT_EQ(c.edge(1, 2), EdgeClamp::none);
}

TEST(NodeLevel, ForcedInvalidOverridesConfidentModel) {
    std::vector<Detection> dets = {det(1, 1, {10, 10, 40, 100}), det(2, 1, {300, 10, 40, 100})};
    ScorerParams p;
    p.node_weights.back() = logit(0.99);
    ClampSet clamps;
    clamps.set_node(1, NodeClamp::forced_invalid, "q1");
    const auto nodes = validate_nodes(dets, p, HierarchyConfig{}, clamps, SolveContext{});
    ASSERT_EQ(nodes.size(), 2u);
    EXPECT_NEAR(nodes[0].score, 0.99, 1e-12);
    EXPECT_FALSE(nodes[0].accepted);
    EXPECT_TRUE(nodes[1].accepted);
}

TEST(NodeLevel, HalfScoreIsAcceptedAtHalfThreshold) {
    std::vector<Detection> dets = {det(1, 1, {10, 10, 40, 100}), det(2, 2, {300, 10, 40, 100})};
    const auto nodes = validate_nodes(dets, ScorerParams{}, HierarchyConfig{}, ClampSet{}, SolveContext{});
    for (const auto& n : nodes) {
        EXPECT_EQ(n.score, 0.5);
        EXPECT_TRUE(n.accepted);
    }
}

TEST(NodeLevel, TrainedScorerAcceptsExactlyTrueDetections) {
    WorldConfig w = clean_world(32);
    w.fp_rate = 0.1;
    const auto seq = generate(w);
    const auto matched = match_detections(seq.detections, *seq.ground_truth, 0.5);
    const auto nodes =
        validate_nodes(seq.detections, clean_params(), HierarchyConfig{}, ClampSet{}, context_for(seq));
    long agree = 0;
    for (const auto& n : nodes) agree += n.accepted == (matched.count(n.det_id) > 0);
    EXPECT_GE(static_cast<double>(agree) / static_cast<double>(nodes.size()), 0.99);
}

TEST(LevelGraph, LargeKGivesCompleteBipartite) {
    std::vector<Detection> dets;
    for (int i = 0; i < 3; ++i) dets.push_back(det(1 + i, 1, Box{100.0 * i, 0, 40, 100}));
    for (int j = 0; j < 4; ++j) dets.push_back(det(11 + j, 2, Box{100.0 * j, 0, 40, 100}));
    const auto index = index_detections(dets);
    std::vector<Cluster> clusters;
    for (const auto& d : dets) clusters.push_back(make_cluster({d.det_id}, 0, index));
    auto g = build_level_graph(clusters, 1, 2, 1, ScorerParams{}, 10, ClampSet{}, index);
    EXPECT_EQ(g.edges.size(), 12u);
    g = build_level_graph(clusters, 1, 2, 1, ScorerParams{}, 1, ClampSet{}, index);
    EXPECT_LT(g.edges.size(), 12u);
}

TEST(LevelGraph, ForcedOffEdgeNeverSelected) {
    std::vector<Detection> dets = {det(1, 1, {0, 0, 40, 100}), det(2, 2, {0, 0, 40, 100})};
    const auto index = index_detections(dets);
    std::vector<Cluster> clusters = {make_cluster({1}, 0, index), make_cluster({2}, 0, index)};
    ScorerParams p;
    p.edge_weights.back() = logit(0.999);
    ClampSet clamps;
    clamps.set_edge(1, 2, EdgeClamp::forced_off, "q1");
    auto g = build_level_graph(clusters, 1, 2, 1, p, 10, clamps, index);
    ASSERT_EQ(g.edges.size(), 1u);
    EXPECT_EQ(g.edges[0].clamp, EdgeClamp::forced_off);
    const auto sol = solve_level(g, index);
    EXPECT_FALSE(g.edges[0].selected);
    EXPECT_EQ(sol.clusters.size(), 2u);
}

TEST(LevelGraph, TimeOverlappingClustersGetNoEdge) {
    // Level 2 (span 4): left half frames 1-2, right half 3-4. A cluster that
    // reaches into the right half would straddle; overlapping clusters on
    // one side never pair up.
    std::vector<Detection> dets = {det(1, 1, {0, 0, 40, 100}), det(2, 2, {0, 0, 40, 100}),
                                   det(3, 1, {200, 0, 40, 100}), det(4, 3, {0, 0, 40, 100})};
    const auto index = index_detections(dets);
    std::vector<Cluster> clusters = {make_cluster({1, 2}, 1, index), make_cluster({3}, 1, index),
                                     make_cluster({4}, 1, index)};
    auto g = build_level_graph(clusters, 2, 4, 1, ScorerParams{}, 10, ClampSet{}, index);
    for (const auto& e : g.edges) {
        const auto* a = g.find(e.earlier);
        const auto* b = g.find(e.later);
        EXPECT_LT(a->last_frame, b->first_frame);
    }
    EXPECT_EQ(g.edges.size(), 2u);
}

TEST(SolveLevel, TwoByTwoOddsMatrix) {
    TinyLevel t(2, 2);
    t.edge(1, 101, sigmoid(2));
    t.edge(1, 102, sigmoid(1));
    t.edge(2, 101, sigmoid(1));
    t.edge(2, 102, sigmoid(2));
    const auto sol = solve_level(t.graph, t.index);
    EXPECT_NEAR(sol.objective, 4.0, 1e-12);
    EXPECT_TRUE(t.graph.edges[0].selected);
    EXPECT_FALSE(t.graph.edges[1].selected);
    EXPECT_FALSE(t.graph.edges[2].selected);
    EXPECT_TRUE(t.graph.edges[3].selected);
    EXPECT_NEAR(*oracle::best_level_objective(t.graph), 4.0, 1e-12);
}

TEST(SolveLevel, SingleEligibleEdgeSelected) {
    TinyLevel t(2, 2);
    t.edge(1, 101, 0.7);
    t.edge(2, 102, 0.3);
    const auto sol = solve_level(t.graph, t.index);
    EXPECT_TRUE(t.graph.edges[0].selected);
    EXPECT_FALSE(t.graph.edges[1].selected);
    EXPECT_EQ(sol.clusters.size(), 3u);
}

TEST(SolveLevel, AllBelowHalfMeansNoMerges) {
    TinyLevel t(3, 3);
    for (DetId a : {1, 2, 3})
        for (DetId b : {101, 102, 103}) t.edge(a, b, 0.2 + 0.01 * static_cast<double>(a));
    const auto sol = solve_level(t.graph, t.index);
    EXPECT_EQ(sol.clusters.size(), 6u);
    EXPECT_EQ(sol.objective, 0.0);
}

TEST(SolveLevel, ForcedOnSharingEndpointIsConflict) {
    TinyLevel t(2, 1);
    t.edge(1, 101, 0.2, EdgeClamp::forced_on);
    t.edge(2, 101, 0.9, EdgeClamp::forced_on);
    EXPECT_THROW(solve_level(t.graph, t.index), ConflictError);
    EXPECT_FALSE(oracle::best_level_objective(t.graph).has_value());
}

TEST(SolveLevel, ForcedOnWinsOverBetterUnclampedEdges) {
    TinyLevel t(2, 2);
    t.edge(1, 101, 0.1, EdgeClamp::forced_on);
    t.edge(1, 102, 0.99);
    t.edge(2, 101, 0.99);
    t.edge(2, 102, 0.6);
    const auto sol = solve_level(t.graph, t.index);
    EXPECT_TRUE(t.graph.edges[0].selected);
    EXPECT_TRUE(t.graph.edges[3].selected);
    EXPECT_NEAR(sol.objective, logit(0.6), 1e-12);
}

TEST(SolveLevel, MatchesBruteForceOnRandomGraphs) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int inst = 0; inst < 60; ++inst) {
        const int l = 1 + static_cast<int>(gen() % 6), r = 1 + static_cast<int>(gen() % 6);
        TinyLevel t(l, r);
        for (int i = 0; i < l; ++i)
            for (int j = 0; j < r; ++j) {
                if (u(gen) < 0.3) continue;
                const double c = u(gen);
                t.edge(1 + i, 101 + j, 0.01 + 0.98 * u(gen),
                       c < 0.08 ? EdgeClamp::forced_on : c < 0.2 ? EdgeClamp::forced_off : EdgeClamp::none);
            }
        const auto expect = oracle::best_level_objective(t.graph);
        if (!expect) {
            EXPECT_THROW(solve_level(t.graph, t.index), ConflictError);
            continue;
        }
        const auto sol = solve_level(t.graph, t.index);
        EXPECT_NEAR(sol.objective, *expect, 1e-12) << "instance " << inst;
    }
}

TEST(Solver, SingleDetectionIsOneTrajectory) {
    Sequence seq;
    seq.seq_id = "one";
    seq.frame_count = 5;
    seq.detections = {det(1, 3, {10, 10, 40, 100})};
    const auto sol = solve_sequence(seq, ScorerParams{}, HierarchyConfig{}, ClampSet{});
    ASSERT_EQ(sol.labels.entries.size(), 1u);
    EXPECT_EQ(sol.labels.entries[0].track_id, 1);
    EXPECT_EQ(sol.labels.entries[0].frame, 3);
}

TEST(Solver, CleanWorldReproducesGroundTruth) {
    const auto seq = generate(clean_world(33));
    const auto sol = solve_sequence(seq, clean_params(), HierarchyConfig{}, ClampSet{});
    EXPECT_EQ(evaluate(sol.labels, *seq.ground_truth).hota, 1.0);
}

TEST(Solver, Deterministic) {
    auto w = standard_benchmark(1).source;
    const auto seq = generate(w);
    const auto a = solve_sequence(seq, clean_params(), HierarchyConfig{}, ClampSet{});
    const auto b = solve_sequence(seq, clean_params(), HierarchyConfig{}, ClampSet{});
    EXPECT_EQ(dump_state(a.clips), dump_state(b.clips));
    EXPECT_EQ(write_labels(a.labels), write_labels(b.labels));
}

TEST(LinkClips, SingleClipOnlyRelabels) {
    std::vector<Detection> dets = {det(5, 1, {0, 0, 40, 100}), det(2, 2, {300, 0, 40, 100})};
    const auto index = index_detections(dets);
    std::vector<std::vector<Cluster>> per_clip = {{make_cluster({5}, 3, index), make_cluster({2}, 3, index)}};
    const auto out = link_clips(per_clip, clean_params(), HierarchyConfig{}, ClampSet{}, index);
    ASSERT_EQ(out.size(), 2u);
    const auto traj = to_trajectories(out, index);
    ASSERT_EQ(traj.size(), 2u);
    EXPECT_EQ(traj[0].members, std::vector<DetId>{5});
    EXPECT_EQ(traj[0].track_id, 1);
    EXPECT_EQ(traj[1].members, std::vector<DetId>{2});
}

TEST(LinkClips, TrackAcrossClipBoundaryKeepsOneId) {
    WorldConfig w = clean_world(34);
    w.n_frames = 700;
    const auto seq = generate(w);
    const auto sol = solve_sequence(seq, clean_params(), HierarchyConfig{}, ClampSet{});
    ASSERT_EQ(sol.clips.size(), 2u);
    std::map<TrackId, std::set<TrackId>> gt_to_pred;
    std::map<std::pair<int, TrackId>, TrackId> pred_at;
    for (const auto& e : sol.labels.entries)
        for (const auto& g : seq.ground_truth->entries)
            if (g.frame == e.frame && g.box == e.box) gt_to_pred[g.track_id].insert(e.track_id);
    ASSERT_FALSE(gt_to_pred.empty());
    for (const auto& [gt, preds] : gt_to_pred) EXPECT_EQ(preds.size(), 1u) << "gt track " << gt;
    EXPECT_EQ(evaluate(sol.labels, *seq.ground_truth).hota, 1.0);
}

TEST(LinkClips, EmptyMiddleClipIsNotBridged) {
    std::vector<Detection> dets = {det(1, 10, {0, 0, 40, 100}), det(2, 30, {0, 0, 40, 100})};
    const auto index = index_detections(dets);
    std::vector<std::vector<Cluster>> per_clip = {{make_cluster({1}, 3, index)}, {}, {make_cluster({2}, 3, index)}};
    ScorerParams p;
    p.edge_weights.back() = 10.0;
    HierarchyConfig h;
    h.clip_length = 10;
    h.edge_level_spans = {2, 4, 8};
    const auto out = link_clips(per_clip, p, h, ClampSet{}, index);
    EXPECT_EQ(out.size(), 2u);
}

TEST(Export, GapFillingAndRefinedBoxes) {
    std::vector<Detection> dets = {det(1, 1, {0, 0, 40, 100}), det(2, 3, {10, 20, 60, 120}),
                                   det(3, 30, {0, 0, 40, 100}, DetectionSource::annotator_refined),
                                   det(4, 50, {100, 0, 40, 100})};
    const auto index = index_detections(dets);
    std::vector<Cluster> clusters = {make_cluster({1, 2, 3}, 3, index), make_cluster({4}, 3, index)};
    const auto labels = extract_labels(clusters, index, "s", 8);
    // Track 1: frames 1, 2 (interpolated), 3, 30; nothing between 3 and 30.
    std::vector<LabelEntry> t1;
    for (const auto& e : labels.entries)
        if (e.track_id == 1) t1.push_back(e);
    ASSERT_EQ(t1.size(), 4u);
    EXPECT_EQ(t1[1].frame, 2);
    EXPECT_EQ(t1[1].box, (Box{5, 10, 50, 110}));
    EXPECT_EQ(t1[1].provenance, LabelProvenance::interpolated);
    EXPECT_EQ(t1[3].frame, 30);
    EXPECT_EQ(t1[3].box, dets[2].box);
    EXPECT_EQ(t1[3].provenance, LabelProvenance::human);
    EXPECT_EQ(t1[0].provenance, LabelProvenance::pseudo);

    const auto no_fill = extract_labels(clusters, index, "s", 0);
    EXPECT_EQ(no_fill.entries.size(), 4u);
}

TEST(Admission, KeepsOrderAndThreshold) {
    Sequence seq;
    seq.frame_count = 2;
    seq.detections = {det(1, 1, {0, 0, 1, 1}), det(2, 1, {5, 5, 1, 1}), det(3, 2, {0, 0, 1, 1})};
    seq.detections[1].confidence = 0.05;
    const auto a = admit(seq, 0.1);
    ASSERT_EQ(a.detections.size(), 2u);
    EXPECT_EQ(a.detections[0].det_id, 1);
    EXPECT_EQ(a.detections[1].det_id, 3);
}
