#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tracklabel/active.hpp"
#include "tracklabel/annotator.hpp"
#include "tracklabel/engine.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/metrics.hpp"
#include "tracklabel/mot_io.hpp"
#include "tracklabel/synthgen.hpp"

using namespace tracklabel;

namespace {

Detection det(DetId id, int frame, Box b) {
    Detection d;
    d.det_id = id;
    d.frame = frame;
    d.box = b;
    d.confidence = 0.9;
    return d;
}

// Level-1 graph over singleton clusters: left in frame 1, right in frame 2.
struct TinyLevel {
    std::vector<Detection> dets;
    DetectionIndex index;
    LevelGraph graph;

    TinyLevel(int left, int right) {
        for (int i = 0; i < left; ++i) dets.push_back(det(1 + i, 1, Box{100.0 * i, 0, 40, 100}));
        for (int j = 0; j < right; ++j) dets.push_back(det(101 + j, 2, Box{100.0 * j, 0, 40, 100}));
        index = index_detections(dets);
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

// Admitted target of benchmark 1 with params pretrained on its source.
struct World {
    PipelineConfig cfg;
    Sequence target;
    ScorerParams params;
};

const World& world() {
    static const World w = [] {
        World out;
        out.cfg = standard_benchmark(1);
        const auto source = make_source(out.cfg);
        out.params = pretrain({&source, 1}, out.cfg.hierarchy, out.cfg.train, out.cfg.admission).params;
        out.target = admit(make_target(out.cfg), out.cfg.admission);
        return out;
    }();
    return w;
}

BudgetLedger only_level(int levels, int level, long clicks) {
    BudgetLedger b;
    b.total = clicks;
    b.levels.assign(static_cast<std::size_t>(levels), 0);
    b.levels[static_cast<std::size_t>(level)] = clicks;
    b.spent_levels.assign(static_cast<std::size_t>(levels), 0);
    return b;
}

LabelingOptions options() {
    LabelingOptions o;
    o.hierarchy = world().cfg.hierarchy;
    return o;
}

double radius(const std::vector<std::vector<double>>& pts, const std::vector<std::size_t>& picks) {
    double r = 0.0;
    for (const auto& p : pts) {
        double best = 1e300;
        for (auto i : picks) {
            double s = 0.0;
            for (std::size_t d = 0; d < p.size(); ++d) s += (p[d] - pts[i][d]) * (p[d] - pts[i][d]);
            best = std::min(best, std::sqrt(s));
        }
        r = std::max(r, best);
    }
    return r;
}

}  // namespace

TEST(Entropy, KnownValues) {
    EXPECT_NEAR(entropy(0.5), std::log(2.0), 1e-12);
    EXPECT_LT(entropy(1.0 - kProbEpsilon), 2e-6);
    EXPECT_NEAR(entropy(0.9), 0.325083, 1e-6);
    EXPECT_EQ(entropy(0.0), 0.0);
    EXPECT_EQ(entropy(1.0), 0.0);
    EXPECT_THROW(entropy(1.1), DomainError);
    EXPECT_THROW(entropy(-0.1), DomainError);
    EXPECT_THROW(entropy(std::nan("")), DomainError);
}

TEST(Entropy, SymmetricAndBoundedByLn2) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double p = u(gen);
        EXPECT_NEAR(entropy(p), entropy(1.0 - p), 1e-12);
        EXPECT_NEAR(entropy(p), oracle::binary_entropy(p), 1e-12);
        EXPECT_LE(entropy(p), std::log(2.0) + 1e-15);
    }
}

TEST(Uncertainty, MaxOverIncidentEdges) {
    TinyLevel t(1, 3);
    t.edge(1, 101, 0.9);
    t.edge(1, 102, 0.5);
    t.edge(1, 103, 0.1);
    EXPECT_NEAR(node_uncertainty(1, t.graph), std::log(2.0), 1e-12);
    EXPECT_NEAR(node_uncertainty(101, t.graph), entropy(0.9), 1e-12);
    for (DetId id : {1, 101, 102, 103})
        EXPECT_NEAR(node_uncertainty(id, t.graph), oracle::direct_uncertainty(id, t.graph), 1e-12);
}

TEST(Uncertainty, ClampedEdgesAreIgnored) {
    TinyLevel t(1, 2);
    t.edge(1, 101, 0.5, EdgeClamp::forced_off);
    t.edge(1, 102, 0.6, EdgeClamp::forced_on);
    EXPECT_EQ(node_uncertainty(1, t.graph), 0.0);
    TinyLevel lonely(1, 0);
    EXPECT_EQ(node_uncertainty(1, lonely.graph), 0.0);
}

TEST(Uncertainty, NodeLevelUsesScore) {
    ScoredNode n;
    n.score = 0.5;
    EXPECT_NEAR(node_uncertainty(n), std::log(2.0), 1e-12);
    n.score = 0.9;
    EXPECT_NEAR(node_uncertainty(n), 0.325083, 1e-6);
}

TEST(Budget, Mot17Split) {
    const auto b = allocate_budget(100, 10, BudgetPolicy::mot17_style);
    EXPECT_EQ(b.levels, (std::vector<long>{5, 5, 5, 5, 10, 10, 10, 16, 17, 17}));
    EXPECT_EQ(b.reserve, 0);
    EXPECT_EQ(b.levels[7] + b.levels[8] + b.levels[9], 50);
    EXPECT_EQ(b.levels[4] + b.levels[5] + b.levels[6], 30);
    EXPECT_EQ(b.levels[0] + b.levels[1] + b.levels[2] + b.levels[3], 20);
}

TEST(Budget, ZeroBudgetIsAllZero) {
    for (auto p : {BudgetPolicy::mot17_style, BudgetPolicy::dancetrack_style}) {
        const auto b = allocate_budget(0, 10, p);
        EXPECT_EQ(b.levels, std::vector<long>(10, 0));
        EXPECT_EQ(b.reserve, 0);
    }
}

TEST(Budget, DancetrackReserve) {
    const auto b = allocate_budget(100, 10, BudgetPolicy::dancetrack_style);
    EXPECT_EQ(b.reserve, 30);
    EXPECT_EQ(b.levels[7] + b.levels[8] + b.levels[9], 35);
    EXPECT_EQ(b.levels[4] + b.levels[5] + b.levels[6], 21);
    EXPECT_EQ(b.levels[0] + b.levels[1] + b.levels[2] + b.levels[3], 14);
}

TEST(Budget, SplitIsExhaustive) {
    for (long B : {1L, 7L, 33L, 101L, 999L})
        for (int L : {1, 2, 3, 5, 10})
            for (auto p : {BudgetPolicy::mot17_style, BudgetPolicy::dancetrack_style}) {
                const auto b = allocate_budget(B, L, p);
                long sum = b.reserve;
                for (long v : b.levels) sum += v;
                EXPECT_EQ(sum, B) << B << " " << L;
            }
}

TEST(Budget, CustomWeights) {
    const std::vector<double> w = {1, 0, 3};
    const auto b = allocate_budget(40, 3, BudgetPolicy::custom, w, 0.5);
    EXPECT_EQ(b.reserve, 20);
    EXPECT_EQ(b.levels, (std::vector<long>{5, 0, 15}));
}

TEST(Budget, NegativeBudgetAndOverdraft) {
    EXPECT_THROW(allocate_budget(-1, 3, BudgetPolicy::mot17_style), DomainError);
    auto b = allocate_budget(10, 1, BudgetPolicy::mot17_style);
    b.debit(0, QueryKind::validate_node, 10);
    EXPECT_EQ(b.remaining(0), 0);
    EXPECT_THROW(b.debit(0, QueryKind::validate_node, 1), DomainError);
    EXPECT_EQ(b.spent_total(), 10);
}

TEST(Acquisition, SpamRanksByUncertainty) {
    TinyLevel t(3, 3);
    t.edge(1, 101, 0.5);    // A: ln 2
    t.edge(2, 102, 0.9);    // B: 0.325
    t.edge(3, 103, 0.999);  // C: 0.008
    const LevelGraph* g[] = {&t.graph};
    auto ledger = only_level(2, 1, 4);
    const auto qs = select_edge_queries(g, 1, ledger, Acquisition::spam, 0);
    std::vector<DetId> subjects;
    for (const auto& q : qs) subjects.push_back(q.subject);
    // Each edge's two endpoints tie; the lower id goes first.
    EXPECT_EQ(subjects, (std::vector<DetId>{1, 101, 2, 102}));
    for (const auto& q : qs) {
        EXPECT_EQ(q.kind, QueryKind::associate);
        EXPECT_EQ(q.cost, 1);
        EXPECT_EQ(q.bucket, 1);
        ASSERT_EQ(q.candidates.size(), 1u);
    }
    EXPECT_NEAR(qs[0].uncertainty, std::log(2.0), 1e-12);
    ledger = only_level(2, 1, 2);
    EXPECT_EQ(select_edge_queries(g, 1, ledger, Acquisition::spam, 0).size(), 2u);
}

TEST(Acquisition, CandidatesByScore) {
    TinyLevel t(1, 3);
    t.edge(1, 101, 0.2);
    t.edge(1, 102, 0.8);
    t.edge(1, 103, 0.6, EdgeClamp::forced_off);
    const LevelGraph* g[] = {&t.graph};
    const auto qs = select_edge_queries(g, 1, only_level(2, 1, 1), Acquisition::spam, 0);
    ASSERT_EQ(qs.size(), 1u);
    EXPECT_EQ(qs[0].subject, 1);
    ASSERT_EQ(qs[0].candidates.size(), 2u);
    EXPECT_EQ(qs[0].candidates[0].cluster_id, 102);
    EXPECT_EQ(qs[0].candidates[1].cluster_id, 101);
}

TEST(Acquisition, RandomIsSeeded) {
    TinyLevel t(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) t.edge(1 + i, 101 + j, 0.1 + 0.13 * ((i + j) % 6));
    const LevelGraph* g[] = {&t.graph};
    auto ids = [&](std::uint64_t seed) {
        std::vector<DetId> out;
        for (const auto& q : select_edge_queries(g, 1, only_level(2, 1, 5), Acquisition::random, seed))
            out.push_back(q.subject);
        return out;
    };
    EXPECT_EQ(ids(3), ids(3));
    bool differs = false;
    for (std::uint64_t s = 4; s < 10 && !differs; ++s) differs = ids(s) != ids(3);
    EXPECT_TRUE(differs);
}

TEST(Coreset, CollinearPointsPickExtremes) {
    const std::vector<std::vector<double>> pts = {{0.0}, {1.0}, {10.0}};
    for (std::size_t seed = 0; seed < 3; ++seed) {
        auto picks = k_center(pts, 2, seed);
        std::sort(picks.begin(), picks.end());
        EXPECT_EQ(picks, (std::vector<std::size_t>{0, 2}));
        EXPECT_EQ(radius(pts, picks), oracle::best_k_center_radius(pts, 2));
    }
}

TEST(Coreset, GreedyIsWithinTwiceOptimal) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int inst = 0; inst < 50; ++inst) {
        std::vector<std::vector<double>> pts(3 + gen() % 6, std::vector<double>(2));
        for (auto& p : pts)
            for (auto& v : p) v = u(gen);
        const std::size_t k = 1 + gen() % 3;
        const auto picks = k_center(pts, k, 0);
        EXPECT_EQ(picks.size(), std::min(k, pts.size()));
        EXPECT_LE(radius(pts, picks), 2.0 * oracle::best_k_center_radius(pts, k) + 1e-12);
    }
}

TEST(ValidateEffects, ClusterRejectClampsEveryMember) {
    AnnotationQuery q;
    q.kind = QueryKind::validate_node;
    q.level = 5;
    q.subject = 100;
    for (DetId m = 100; m < 132; ++m) q.members.push_back(m);
    q.cost = query_cost(q.kind);
    const auto fx = validate_effects(q, false);
    ASSERT_EQ(fx.size(), 32u);
    for (const auto& [id, state] : fx) EXPECT_EQ(state, NodeClamp::forced_invalid);
    EXPECT_EQ(q.cost, 1);

    AnnotationQuery single;
    single.subject = 7;
    const auto one = validate_effects(single, true);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0], (std::pair<DetId, NodeClamp>{7, NodeClamp::forced_valid}));
}

TEST(Session, NoneOfTheseClampsEveryCandidateOff) {
    const auto& w = world();
    const int L = w.cfg.hierarchy.level_count();
    LabelingSession s(w.target, w.params, options(), only_level(L, 1, 20));
    EXPECT_EQ(s.level(), 1);
    const auto pending = s.pending();
    ASSERT_FALSE(pending.empty());
    const auto& q = pending.front();
    ASSERT_EQ(q.kind, QueryKind::associate);
    ASSERT_FALSE(q.candidates.empty());

    AnnotatorResponse r;
    r.query_id = q.query_id;
    r.kind = QueryKind::associate;
    EXPECT_EQ(s.submit(r), 1);
    EXPECT_EQ(s.ledger().spent_total(), 1);
    EXPECT_EQ(s.clamps().edges().size(), q.candidates.size());
    for (const auto& c : q.candidates) EXPECT_EQ(s.clamps().edge(q.subject, c.cluster_id), EdgeClamp::forced_off);
    const auto rec = nlohmann::json::parse(s.audit().back());
    EXPECT_EQ(rec.at("event"), "response");
    EXPECT_EQ(rec.at("effects").size(), q.candidates.size());
}

TEST(Session, DuplicateAndStaleResponsesAreRejected) {
    const auto& w = world();
    LabelingSession s(w.target, w.params, options(), allocate_budget(30, w.cfg.hierarchy.level_count(),
                                                                       BudgetPolicy::mot17_style));
    OracleAnnotator oracle(w.target);
    const auto q = s.pending().front();
    const auto r = *oracle.answer(q);
    s.submit(r);
    const auto ledger = s.ledger();
    const auto clamps = s.clamps();
    EXPECT_THROW(s.submit(r), ProtocolError);
    EXPECT_EQ(s.ledger(), ledger);
    EXPECT_EQ(s.clamps(), clamps);
    EXPECT_EQ(nlohmann::json::parse(s.audit().back()).at("event"), "rejected");

    AnnotatorResponse stale = r;
    stale.query_id = "q99999";
    EXPECT_THROW(s.submit(stale), ProtocolError);
    EXPECT_THROW(s.skip("q99999"), ProtocolError);

    if (!s.pending().empty()) {
        AnnotatorResponse wrong = *oracle.answer(s.pending().front());
        wrong.kind = wrong.kind == QueryKind::associate ? QueryKind::validate_node : QueryKind::associate;
        EXPECT_THROW(s.submit(wrong), ProtocolError);
        EXPECT_EQ(s.ledger(), ledger);
    }
}

TEST(Session, SkipCostsNothing) {
    const auto& w = world();
    const int L = w.cfg.hierarchy.level_count();
    LabelingSession s(w.target, w.params, options(), allocate_budget(20, L, BudgetPolicy::mot17_style));
    const auto q = s.pending().front();
    s.skip(q.query_id);
    EXPECT_EQ(s.ledger().spent_total(), 0);
    EXPECT_TRUE(s.clamps().empty());
    EXPECT_THROW(s.skip(q.query_id), ProtocolError);
}

TEST(Session, ReplayReproducesState) {
    const auto& w = world();
    const int L = w.cfg.hierarchy.level_count();
    const auto ledger = allocate_budget(60, L, BudgetPolicy::dancetrack_style);
    LabelingSession s(w.target, w.params, options(), ledger);
    OracleAnnotator oracle(w.target);
    int n = 0;
    while (!s.complete() && n < 40) {
        const auto q = s.pending(1).front();
        if (n++ % 5 == 4) {
            s.skip(q.query_id);
            continue;
        }
        try {
            s.submit(*oracle.answer(q));
        } catch (const ConflictError&) {
            s.skip(q.query_id);
        }
    }
    const auto r = LabelingSession::replay(w.target, w.params, options(), ledger, s.audit());
    EXPECT_EQ(r.audit(), s.audit());
    EXPECT_EQ(r.state_dump(), s.state_dump());
    EXPECT_EQ(r.ledger(), s.ledger());
    EXPECT_EQ(replay_audit(s.audit()), s.clamps());
    EXPECT_EQ(audit_clicks(s.audit()), s.ledger().spent_total());
}

TEST(Labeling, ZeroBudgetIsPseudoLabeling) {
    const auto& w = world();
    const int L = w.cfg.hierarchy.level_count();
    OracleAnnotator oracle(w.target);
    const auto r = run_active_labeling(w.target, w.params, options(), allocate_budget(0, L, BudgetPolicy::mot17_style),
                                       oracle);
    EXPECT_EQ(r.answered, 0);
    EXPECT_TRUE(r.clamps.empty());
    const auto pseudo = solve_sequence(w.target, w.params, w.cfg.hierarchy, {}).labels;
    EXPECT_EQ(write_labels(r.labels), write_labels(pseudo));
}

TEST(Labeling, ClickAccountingIsConsistent) {
    const auto& w = world();
    const int L = w.cfg.hierarchy.level_count();
    for (auto acq : {Acquisition::spam, Acquisition::random, Acquisition::coreset}) {
        auto o = options();
        o.acquisition = acq;
        OracleAnnotator oracle(w.target);
        const auto r = run_active_labeling(w.target, w.params, o, allocate_budget(150, L, BudgetPolicy::dancetrack_style),
                                           oracle);
        const auto c = oracle::check_clicks(r.audit, r.ledger);
        EXPECT_TRUE(c.consistent()) << to_string(acq) << " ledger " << c.ledger_spend << " audit " << c.audit_sum
                                    << " answered " << c.answered_cost;
        EXPECT_LE(r.ledger.spent_total(), 150);
        EXPECT_GT(r.answered, 0);
    }
}

TEST(Labeling, UnlimitedOracleBudgetRecoversGroundTruth) {
    const auto& w = world();
    const int L = w.cfg.hierarchy.level_count();
    const long full = full_manual_cost(*w.target.ground_truth);
    OracleAnnotator oracle(w.target);
    const auto r = run_active_labeling(w.target, w.params, options(),
                                       allocate_budget(100 * full, L, BudgetPolicy::dancetrack_style), oracle);
    EXPECT_EQ(evaluate(quantize_labels(r.labels), *w.target.ground_truth).hota, 1.0);
}

TEST(Interpolation, FullRatioIsGroundTruth) {
    const auto seq = generate(interp_benchmark());
    const auto labels = interpolation_baseline(seq, 1.0);
    ASSERT_EQ(labels.entries.size(), seq.ground_truth->entries.size());
    for (std::size_t i = 0; i < labels.entries.size(); ++i) {
        EXPECT_EQ(labels.entries[i].box, seq.ground_truth->entries[i].box);
        EXPECT_EQ(labels.entries[i].track_id, seq.ground_truth->entries[i].track_id);
    }
    EXPECT_EQ(evaluate(labels, *seq.ground_truth).hota, 1.0);
}

// Ground truth is stored at 4 decimals, so a midpoint of two stored boxes can
// differ from the stored middle box by half a unit in the last place.
TEST(Interpolation, ConstantVelocityHalfRatioIsExact) {
    WorldConfig w;
    w.seed = 5;
    w.n_frames = 101;
    const auto seq = generate(w);
    const auto labels = interpolation_baseline(seq, 0.5);
    ASSERT_EQ(labels.entries.size(), seq.ground_truth->entries.size());
    for (std::size_t i = 0; i < labels.entries.size(); ++i) {
        const auto& a = labels.entries[i].box;
        const auto& b = seq.ground_truth->entries[i].box;
        EXPECT_NEAR(a.left, b.left, 5e-5 + 1e-9);
        EXPECT_NEAR(a.top, b.top, 5e-5 + 1e-9);
        EXPECT_NEAR(a.width, b.width, 5e-5 + 1e-9);
        EXPECT_NEAR(a.height, b.height, 5e-5 + 1e-9);
    }
    EXPECT_EQ(evaluate(labels, *seq.ground_truth).hota, 1.0);
}

TEST(Interpolation, RandomWalkDegradesWithSparserKeyframes) {
    const auto seq = generate(interp_benchmark());
    const double half = evaluate(interpolation_baseline(seq, 0.5), *seq.ground_truth).hota;
    const double sparse = evaluate(interpolation_baseline(seq, 0.05), *seq.ground_truth).hota;
    EXPECT_GE(half, 0.99);
    EXPECT_LE(sparse, half - 0.02);
}

TEST(Interpolation, InvalidRatio) {
    const auto seq = generate(WorldConfig{});
    EXPECT_THROW(interpolation_baseline(seq, 0.0), DomainError);
    EXPECT_THROW(interpolation_baseline(seq, 1.5), DomainError);
    Sequence bare = seq;
    bare.ground_truth.reset();
    EXPECT_THROW(interpolation_baseline(bare, 0.5), DomainError);
}
