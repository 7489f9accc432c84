#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "tracklabel/engine.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/scorer.hpp"
#include "tracklabel/synthgen.hpp"
#include "tracklabel/training.hpp"

using namespace tracklabel;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Pretrained params on a clean world with false positives; built once.
const ScorerParams& trained_params() {
    static const ScorerParams params = [] {
        WorldConfig w;
        w.seed = 11;
        w.fp_rate = 0.1;
        const auto seq = generate(w);
        return pretrain({&seq, 1}, HierarchyConfig{}, TrainOptions{}, 0.0).params;
    }();
    return params;
}

Detection det(DetId id, int frame, Box b, std::vector<float> emb) {
    Detection d;
    d.det_id = id;
    d.frame = frame;
    d.box = b;
    d.confidence = 0.9;
    d.embedding = std::move(emb);
    return d;
}

double edge_score(const Detection& a, const Detection& b, const ScorerParams& p) {
    const Detection* pa[] = {&a};
    const Detection* pb[] = {&b};
    return score_edge(edge_features(summarize(pa), summarize(pb), 2), p);
}

}  // namespace

TEST(Scorer, ZeroWeightsGiveHalf) {
    ScorerParams p;
    NodeFeatures nf{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    EdgeFeatures ef{0.9, 0.1, 3.0, 0.2, 0.2, 1.0, 0.4, 0.0};
    EXPECT_EQ(score_node(nf, p), 0.5);
    EXPECT_EQ(score_edge(ef, p), 0.5);
}

TEST(Scorer, LargeBiasSaturatesAtClamp) {
    ScorerParams p;
    p.node_weights.back() = 20.0;
    EXPECT_EQ(score_node(NodeFeatures{}, p), 1.0 - kProbEpsilon);
    p.node_weights.back() = -40.0;
    EXPECT_EQ(score_node(NodeFeatures{}, p), kProbEpsilon);
}

TEST(Scorer, WrongWeightCountIsConfigError) {
    std::vector<double> x(3, 0.0), w(3, 0.0);
    EXPECT_THROW(logistic_score(x, w), ConfigError);
}

TEST(Scorer, ParamsRoundTripExactly) {
    ScorerParams p = trained_params();
    p.version = "7";
    std::istringstream in(write_params(p));
    const auto back = parse_params(in);
    EXPECT_EQ(back, p);
}

TEST(Scorer, SchemaMismatchIsConfigError) {
    std::string text = write_params(ScorerParams{});
    text.replace(text.find("schema ") + 7, 4, "ffff");
    std::istringstream in(text);
    EXPECT_THROW(parse_params(in), ConfigError);
}

TEST(Scorer, TruncatedParamsIsParseError) {
    std::string text = write_params(ScorerParams{});
    text.resize(text.size() / 2);
    std::istringstream in(text);
    EXPECT_THROW(parse_params(in), ParseError);
}

TEST(Scorer, TrainedNodeHeadRanksTrueDetectionsAboveFalsePositives) {
    WorldConfig w;
    w.seed = 12;  // held out
    w.fp_rate = 0.1;
    const auto seq = generate(w);
    const auto matched = match_detections(seq.detections, *seq.ground_truth, 0.5);
    const auto feats = node_features(seq.detections, FrameBounds{}, seq.frame_count);
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < seq.detections.size(); ++i)
        (matched.count(seq.detections[i].det_id) ? pos : neg).push_back(score_node(feats[i], trained_params()));
    ASSERT_FALSE(pos.empty());
    ASSERT_FALSE(neg.empty());
    long wins = 0;
    for (double a : pos)
        for (double b : neg) wins += a > b;
    EXPECT_GE(static_cast<double>(wins) / static_cast<double>(pos.size() * neg.size()), 0.95);
}

TEST(Scorer, TrainedEdgeHeadOnClearCases) {
    std::vector<float> e(16, 0.0f);
    e[0] = 1.0f;
    std::vector<float> opposite(16, 0.0f);
    opposite[0] = -1.0f;
    const Box b{500, 300, 41, 100};
    EXPECT_GT(edge_score(det(1, 10, b, e), det(2, 11, b, e), trained_params()), 0.9);
    const Box far{500 + 10 * 100, 300, 41, 100};
    EXPECT_LT(edge_score(det(1, 10, b, e), det(2, 11, far, opposite), trained_params()), 0.1);
}

TEST(FocalLoss, GammaZeroIsCrossEntropy) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.001, 0.999);
    for (int i = 0; i < 1000; ++i) {
        const double p = u(gen);
        const double y = static_cast<double>(i % 2);
        const double ce = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        EXPECT_NEAR(focal_loss_prob(p, y, 0.0), ce, 1e-12);
        const double z = std::log(p / (1.0 - p));
        EXPECT_NEAR(focal_loss(z, y, 0.0), ce, 1e-12);
    }
}

TEST(FocalLoss, LogitAndProbabilityFormsAgree) {
    for (double gamma : {0.0, 1.0, 2.0})
        for (double z = -8.0; z <= 8.0; z += 0.37)
            for (double y : {0.0, 1.0})
                EXPECT_NEAR(focal_loss(z, y, gamma), focal_loss_prob(sigmoid(z), y, gamma), 1e-9);
}

TEST(FocalLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double gamma : {0.0, 1.0, 2.0}) {
        std::vector<Sample> batch;
        for (int i = 0; i < 100; ++i) {
            Sample s;
            for (int d = 0; d < 8; ++d) s.x.push_back(n(gen));
            s.label = i % 3 == 0 ? 1.0 : 0.0;
            s.weight = 0.2 + std::abs(n(gen));
            batch.push_back(s);
        }
        std::vector<double> w(9);
        for (auto& v : w) v = 0.5 * n(gen);
        const auto g = objective_grad(batch, w, gamma, 1e-3);
        const double h = 1e-5;
        for (std::size_t k = 0; k < w.size(); ++k) {
            auto hi = w, lo = w;
            hi[k] += h;
            lo[k] -= h;
            const double fd = (objective(batch, hi, gamma, 1e-3) - objective(batch, lo, gamma, 1e-3)) / (2 * h);
            EXPECT_LT(std::abs(fd - g[k]) / std::max({std::abs(fd), std::abs(g[k]), 1e-3}), 1e-5)
                << "gamma " << gamma << " weight " << k;
        }
    }
}

TEST(Training, SeparableSetReachesFullAccuracy) {
    std::vector<Sample> data;
    for (int i = 0; i < 40; ++i) {
        const double x = -2.0 + 0.1 * i;
        data.push_back({{x, 0.3 * (i % 5)}, x > 0.05 ? 1.0 : 0.0, 1.0});
    }
    TrainOptions o;
    o.epochs = 2000;
    o.weight_decay = 0.0;
    const auto fit = train_head(data, std::vector<double>(3, 0.0), o);
    for (const auto& s : data) EXPECT_EQ(logistic_score(s.x, fit.weights) >= 0.5, s.label == 1.0);
    EXPECT_LT(fit.loss_trace.back(), fit.loss_trace.front());
}

TEST(Training, SingleClassIsTrainingError) {
    std::vector<Sample> data = {{{1.0}, 1.0, 1.0}, {{2.0}, 1.0, 1.0}};
    EXPECT_THROW(train_head(data, {0.0, 0.0}, TrainOptions{}), TrainingError);
}

TEST(TrainingLabels, IdenticalBoxIsPositiveNode) {
    Sequence seq;
    seq.seq_id = "t";
    seq.frame_count = 2;
    seq.detections = {det(1, 1, {10, 10, 20, 40}, {}), det(2, 2, {11, 10, 20, 40}, {}),
                      det(3, 1, {900, 500, 20, 40}, {})};
    LabelSet gt;
    gt.entries = {{1, 7, {10, 10, 20, 40}}, {2, 7, {11, 10, 20, 40}}};
    seq.ground_truth = gt;
    const auto m = match_detections(seq.detections, gt, 0.5);
    EXPECT_EQ(m.count(1), 1u);
    EXPECT_EQ(m.count(3), 0u);

    TrainingSetOptions o;
    const auto ts = make_training_set(seq, gt, HierarchyConfig{}, o);
    ASSERT_EQ(ts.nodes.size(), 3u);
    EXPECT_EQ(ts.nodes[0].label, 1.0);
    EXPECT_EQ(ts.nodes[1].label, 1.0);
    EXPECT_EQ(ts.nodes[2].label, 0.0);
    // Same track in consecutive frames: a positive edge exists.
    bool positive_edge = false;
    for (const auto& s : ts.edges) positive_edge = positive_edge || s.label == 1.0;
    EXPECT_TRUE(positive_edge);
}

TEST(TrainingLabels, IouExactlyHalfIsPositive) {
    const std::vector<Detection> dets = {det(1, 1, {0, 0, 10, 5}, {})};
    LabelSet gt;
    gt.entries = {{1, 1, {0, 0, 10, 10}}};
    EXPECT_EQ(match_detections(dets, gt, 0.5).count(1), 1u);
    EXPECT_EQ(match_detections(dets, gt, 0.51).count(1), 0u);
}

TEST(SelfTraining, NothingToLearnOnIdenticalCleanDomain) {
    WorldConfig w;
    w.seed = 21;
    w.conf_noise = 0.0;
    const auto source = generate(w);
    const HierarchyConfig h;
    const auto pre = pretrain({&source, 1}, h, TrainOptions{}, 0.1).params;

    WorldConfig held = w;
    held.seed = 22;
    const auto heldout = generate(held);
    TrainingSetOptions tso;
    tso.admission = 0.1;
    const auto eval_set = make_training_set(heldout, *heldout.ground_truth, h, tso);

    SelfTrainOptions so;
    Sequence target = admit(source, 0.1);
    target.ground_truth.reset();
    const auto post = self_train(pre, {&target, 1}, h, so).params;
    const double before = mean_loss(eval_set.nodes, pre.node_weights, 1.0) +
                          mean_loss(eval_set.edges, pre.edge_weights, 1.0);
    const double after = mean_loss(eval_set.nodes, post.node_weights, 1.0) +
                         mean_loss(eval_set.edges, post.edge_weights, 1.0);
    EXPECT_LT(std::abs(after - before), 1e-3);
}

TEST(SelfTraining, DeterministicParams) {
    const auto cfg = standard_benchmark(2);
    const auto source = make_source(cfg);
    const auto pre = pretrain({&source, 1}, cfg.hierarchy, cfg.train, cfg.admission).params;
    Sequence target = admit(make_target(cfg), cfg.admission);
    target.ground_truth.reset();
    SelfTrainOptions so;
    so.train = cfg.train;
    const auto a = self_train(pre, {&target, 1}, cfg.hierarchy, so);
    const auto b = self_train(pre, {&target, 1}, cfg.hierarchy, so);
    EXPECT_EQ(write_params(a.params), write_params(b.params));
    EXPECT_EQ(a.params.provenance, ParamsProvenance::pseudo_label_finetune);
}

TEST(SelfTraining, ShiftedTargetDoesNotGetWorse) {
    const auto cfg = standard_benchmark(1);
    const auto r = run_pipeline(cfg);
    ASSERT_TRUE(r.pretrained_metrics && r.selftrained_metrics);
    EXPECT_GE(r.selftrained_metrics->hota, r.pretrained_metrics->hota);
}
