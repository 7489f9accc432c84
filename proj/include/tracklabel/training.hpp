#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "tracklabel/hierarchy.hpp"
#include "tracklabel/scorer.hpp"
#include "tracklabel/types.hpp"

namespace tracklabel {

struct Sample {
    std::vector<double> x;  // features, no bias term
    double label = 0.0;     // 0 or 1
    double weight = 1.0;
};

struct TrainingSet {
    std::vector<Sample> nodes;
    std::vector<Sample> edges;
};

// FL(p, y) = -y (1-p)^g log p - (1-y) p^g log(1-p), evaluated from the
// logit z with p = sigmoid(z).
double focal_loss(double z, double y, double gamma);
// dFL/dz.
double focal_loss_grad(double z, double y, double gamma);
// Same loss written directly in p, for reference and tests.
double focal_loss_prob(double p, double y, double gamma);

// Weighted mean focal loss plus 0.5 * weight_decay * |w|^2 over the
// non-bias weights.
double objective(std::span<const Sample> samples, std::span<const double> weights, double gamma,
                 double weight_decay);
std::vector<double> objective_grad(std::span<const Sample> samples, std::span<const double> weights, double gamma,
                                   double weight_decay);
// Weighted mean focal loss without the decay term.
double mean_loss(std::span<const Sample> samples, std::span<const double> weights, double gamma);

struct TrainOptions {
    double gamma = 1.0;
    double lr = 0.3;
    double weight_decay = 1e-4;
    int epochs = 200;
    int batch_size = 0;  // 0 = full batch
    std::uint64_t seed = 0;
};

struct HeadFit {
    std::vector<double> weights;
    std::vector<double> loss_trace;  // objective after each epoch
};

// Adam on the focal objective starting from `init`. Throws TrainingError
// unless both classes are present with positive weight.
HeadFit train_head(std::span<const Sample> samples, std::vector<double> init, const TrainOptions& opts);

struct TrainReport {
    ScorerParams params;
    std::vector<double> node_trace;
    std::vector<double> edge_trace;
};

// Trains both heads. Throws TrainingError on a single-class head.
TrainReport train(const TrainingSet& data, const TrainOptions& opts, const ScorerParams& init = {});

// As train(), but a head whose data holds a single class gets a constant
// weight vector with bias log((n_pos + 1) / (n_neg + 1)) instead of failing.
TrainReport train_or_prior(const TrainingSet& data, const TrainOptions& opts, const ScorerParams& init = {});

struct TrainingSetOptions {
    double iou_threshold = 0.5;
    double admission = 0.0;  // detections below this confidence are skipped
    // When set, samples get the probability these params assign to their
    // label (pseudo-label weighting); otherwise weight 1.
    const ScorerParams* weighting = nullptr;
};

// Per-frame greedy one-to-one matching: pairs by descending IoU, ties to the
// lower det_id then lower track id; only IoU >= threshold. Returns
// det_id -> label entry index.
std::map<DetId, std::size_t> match_detections(std::span<const Detection> dets, const LabelSet& labels,
                                              double iou_threshold);

// Node samples for every admitted detection; edge samples from the candidate
// edges of the ideal hierarchy built over the matched detections. Throws
// DomainError for empty labels.
TrainingSet make_training_set(const Sequence& seq, const LabelSet& labels, const HierarchyConfig& cfg,
                              const TrainingSetOptions& opts);

struct SelfTrainOptions {
    TrainOptions train;
    int rounds = 1;
    double admission = 0.1;
    double iou_threshold = 0.5;
};

struct SelfTrainReport {
    ScorerParams params;
    std::vector<LabelSet> pseudo_labels;  // from the last round
};

// Pseudo-label the targets with the current params, build weighted training
// sets and continue training. Throws TrainingError when the solver yields no
// tracks.
SelfTrainReport self_train(const ScorerParams& pretrained, std::span<const Sequence> targets,
                           const HierarchyConfig& cfg, const SelfTrainOptions& opts);

// Training set from ground truth of every source sequence, then train_or_prior.
TrainReport pretrain(std::span<const Sequence> sources, const HierarchyConfig& cfg, const TrainOptions& opts,
                     double admission);

}  // namespace tracklabel
