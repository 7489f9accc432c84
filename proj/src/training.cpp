#include "tracklabel/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "tracklabel/error.hpp"
#include "tracklabel/geometry.hpp"
#include "tracklabel/rng.hpp"

namespace tracklabel {

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double logit(std::span<const double> x, std::span<const double> w) {
    double z = w.back();
    for (std::size_t i = 0; i < x.size(); ++i) z += w[i] * x[i];
    return z;
}

void check_dims(std::span<const Sample> samples, std::span<const double> weights) {
    for (const auto& s : samples)
        if (s.x.size() + 1 != weights.size())
            throw ConfigError("sample has " + std::to_string(s.x.size()) + " features, head has " +
                              std::to_string(weights.size()) + " weights");
}

}  // namespace

double focal_loss(double z, double y, double gamma) {
    const double p = sigmoid(z);
    // -log p = softplus(-z), -log(1-p) = softplus(z)
    return y * std::pow(1.0 - p, gamma) * softplus(-z) + (1.0 - y) * std::pow(p, gamma) * softplus(z);
}

double focal_loss_grad(double z, double y, double gamma) {
    const double p = sigmoid(z);
    const double q = sigmoid(-z);  // 1 - p without cancellation
    const double pos = std::pow(q, gamma) * (-gamma * p * softplus(-z) - q);
    const double neg = std::pow(p, gamma) * (p + gamma * q * softplus(z));
    return y * pos + (1.0 - y) * neg;
}

double focal_loss_prob(double p, double y, double gamma) {
    return -y * std::pow(1.0 - p, gamma) * std::log(p) - (1.0 - y) * std::pow(p, gamma) * std::log(1.0 - p);
}

double mean_loss(std::span<const Sample> samples, std::span<const double> weights, double gamma) {
    check_dims(samples, weights);
    double total = 0.0, wsum = 0.0;
    for (const auto& s : samples) {
        total += s.weight * focal_loss(logit(s.x, weights), s.label, gamma);
        wsum += s.weight;
    }
    return wsum > 0.0 ? total / wsum : 0.0;
}

double objective(std::span<const Sample> samples, std::span<const double> weights, double gamma,
                 double weight_decay) {
    double reg = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) reg += weights[i] * weights[i];
    return mean_loss(samples, weights, gamma) + 0.5 * weight_decay * reg;
}

std::vector<double> objective_grad(std::span<const Sample> samples, std::span<const double> weights, double gamma,
                                   double weight_decay) {
    check_dims(samples, weights);
    std::vector<double> g(weights.size(), 0.0);
    double wsum = 0.0;
    for (const auto& s : samples) wsum += s.weight;
    if (wsum > 0.0) {
        for (const auto& s : samples) {
            const double d = s.weight * focal_loss_grad(logit(s.x, weights), s.label, gamma) / wsum;
            for (std::size_t i = 0; i < s.x.size(); ++i) g[i] += d * s.x[i];
            g.back() += d;
        }
    }
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) g[i] += weight_decay * weights[i];
    return g;
}

HeadFit train_head(std::span<const Sample> samples, std::vector<double> init, const TrainOptions& opts) {
    check_dims(samples, init);
    double pos = 0.0, neg = 0.0;
    for (const auto& s : samples) (s.label > 0.5 ? pos : neg) += s.weight;
    if (!(pos > 0.0) || !(neg > 0.0))
        throw TrainingError("training set needs both classes (positive weight " + std::to_string(pos) +
                            ", negative weight " + std::to_string(neg) + ")");
    if (opts.epochs < 0 || !(opts.lr > 0.0) || opts.weight_decay < 0.0 || opts.gamma < 0.0)
        throw ConfigError("bad training options");

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    HeadFit fit;
    fit.weights = std::move(init);
    std::vector<double> m(fit.weights.size(), 0.0), v(fit.weights.size(), 0.0);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(opts.seed, 11);
    const std::size_t batch = opts.batch_size > 0 ? static_cast<std::size_t>(opts.batch_size) : samples.size();
    long step = 0;
    std::vector<Sample> chunk;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        if (batch < samples.size())
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t start = 0; start < samples.size(); start += batch) {
            std::span<const Sample> part = samples;
            if (batch < samples.size()) {
                chunk.clear();
                for (std::size_t i = start; i < std::min(samples.size(), start + batch); ++i)
                    chunk.push_back(samples[order[i]]);
                part = chunk;
            }
            const auto g = objective_grad(part, fit.weights, opts.gamma, opts.weight_decay);
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < g.size(); ++i) {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                fit.weights[i] -= opts.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
            }
        }
        fit.loss_trace.push_back(objective(samples, fit.weights, opts.gamma, opts.weight_decay));
    }
    return fit;
}

TrainReport train(const TrainingSet& data, const TrainOptions& opts, const ScorerParams& init) {
    TrainReport r;
    r.params = init;
    auto node = train_head(data.nodes, init.node_weights, opts);
    auto edge = train_head(data.edges, init.edge_weights, opts);
    r.params.node_weights = std::move(node.weights);
    r.params.edge_weights = std::move(edge.weights);
    r.node_trace = std::move(node.loss_trace);
    r.edge_trace = std::move(edge.loss_trace);
    return r;
}

namespace {

std::vector<double> prior_head(std::span<const Sample> samples, std::size_t n_weights) {
    double pos = 0.0, neg = 0.0;
    for (const auto& s : samples) (s.label > 0.5 ? pos : neg) += 1.0;
    std::vector<double> w(n_weights, 0.0);
    w.back() = std::log((pos + 1.0) / (neg + 1.0));
    return w;
}

bool has_both(std::span<const Sample> samples) {
    double pos = 0.0, neg = 0.0;
    for (const auto& s : samples) (s.label > 0.5 ? pos : neg) += s.weight;
    return pos > 0.0 && neg > 0.0;
}

}  // namespace

TrainReport train_or_prior(const TrainingSet& data, const TrainOptions& opts, const ScorerParams& init) {
    TrainReport r;
    r.params = init;
    if (has_both(data.nodes)) {
        auto fit = train_head(data.nodes, init.node_weights, opts);
        r.params.node_weights = std::move(fit.weights);
        r.node_trace = std::move(fit.loss_trace);
    } else {
        r.params.node_weights = prior_head(data.nodes, init.node_weights.size());
    }
    if (has_both(data.edges)) {
        auto fit = train_head(data.edges, init.edge_weights, opts);
        r.params.edge_weights = std::move(fit.weights);
        r.edge_trace = std::move(fit.loss_trace);
    } else {
        r.params.edge_weights = prior_head(data.edges, init.edge_weights.size());
    }
    return r;
}

std::map<DetId, std::size_t> match_detections(std::span<const Detection> dets, const LabelSet& labels,
                                              double iou_threshold) {
    std::map<int, std::vector<std::size_t>> label_frames;
    for (std::size_t i = 0; i < labels.entries.size(); ++i) label_frames[labels.entries[i].frame].push_back(i);
    std::map<int, std::vector<const Detection*>> det_frames;
    for (const auto& d : dets) det_frames[d.frame].push_back(&d);

    std::map<DetId, std::size_t> out;
    struct Pair {
        double iou;
        DetId det;
        TrackId track;
        std::size_t label;
    };
    for (const auto& [frame, ds] : det_frames) {
        auto it = label_frames.find(frame);
        if (it == label_frames.end()) continue;
        std::vector<Pair> pairs;
        for (const auto* d : ds)
            for (std::size_t li : it->second) {
                const double v = iou(d->box, labels.entries[li].box);
                if (v >= iou_threshold) pairs.push_back(Pair{v, d->det_id, labels.entries[li].track_id, li});
            }
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            if (a.iou != b.iou) return a.iou > b.iou;
            if (a.det != b.det) return a.det < b.det;
            return a.track < b.track;
        });
        std::set<std::size_t> used;
        for (const auto& p : pairs) {
            if (out.count(p.det) || used.count(p.label)) continue;
            out.emplace(p.det, p.label);
            used.insert(p.label);
        }
    }
    return out;
}

TrainingSet make_training_set(const Sequence& seq, const LabelSet& labels, const HierarchyConfig& cfg,
                              const TrainingSetOptions& opts) {
    if (labels.entries.empty()) throw DomainError("make_training_set: empty labels for " + seq.seq_id);
    std::vector<Detection> admitted;
    for (const auto& d : seq.detections)
        if (d.confidence >= opts.admission) admitted.push_back(d);
    const auto matched = match_detections(admitted, labels, opts.iou_threshold);
    const auto index = index_detections(admitted);
    const auto ctx = context_for(seq);

    TrainingSet out;
    const ScorerParams zero;
    for (const auto& clip : split_clips(seq.frame_count, cfg)) {
        std::vector<Detection> dets;
        for (const auto& d : admitted)
            if (d.frame >= clip.first_frame && d.frame <= clip.last_frame) dets.push_back(d);
        const auto feats = node_features(dets, ctx.bounds, ctx.frame_count, cfg.node_level_window / 2);
        std::map<DetId, TrackId> track_of;
        std::vector<Cluster> clusters;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            auto m = matched.find(dets[i].det_id);
            if (m != matched.end() && !labels.entries[m->second].evaluable) continue;
            Sample s;
            s.x.assign(feats[i].begin(), feats[i].end());
            s.label = m != matched.end() ? 1.0 : 0.0;
            if (opts.weighting) {
                const double p = score_node(feats[i], *opts.weighting);
                s.weight = s.label > 0.5 ? p : 1.0 - p;
            }
            out.nodes.push_back(std::move(s));
            if (m != matched.end()) {
                track_of[dets[i].det_id] = labels.entries[m->second].track_id;
                clusters.push_back(make_cluster({dets[i].det_id}, 0, index));
            }
        }
        std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) { return a.id < b.id; });

        int level = 1;
        for (int span : cfg.edge_level_spans) {
            const auto g = build_level_graph(clusters, level, span, clip.first_frame, zero, cfg.k, ClampSet{}, index);
            for (const auto& e : g.edges) {
                Sample s;
                s.x.assign(e.features.begin(), e.features.end());
                s.label = track_of.at(e.earlier) == track_of.at(e.later) ? 1.0 : 0.0;
                if (opts.weighting) {
                    const double p = score_edge(e.features, *opts.weighting);
                    s.weight = s.label > 0.5 ? p : 1.0 - p;
                }
                out.edges.push_back(std::move(s));
            }
            // Ideal merge: same-track clusters of one window join.
            std::map<std::pair<int, TrackId>, std::vector<DetId>> groups;
            for (const auto& c : g.nodes) {
                auto& v = groups[{g.place(c).first, track_of.at(c.id)}];
                v.insert(v.end(), c.members.begin(), c.members.end());
            }
            std::vector<Cluster> next;
            for (auto& [key, members] : groups) {
                Cluster c = make_cluster(std::move(members), level, index);
                for (DetId m : c.members) track_of[m] = key.second;
                next.push_back(std::move(c));
            }
            std::sort(next.begin(), next.end(), [](const Cluster& a, const Cluster& b) { return a.id < b.id; });
            clusters = std::move(next);
            ++level;
        }
    }
    return out;
}

TrainReport pretrain(std::span<const Sequence> sources, const HierarchyConfig& cfg, const TrainOptions& opts,
                     double admission) {
    TrainingSet all;
    for (const auto& seq : sources) {
        if (!seq.ground_truth) throw DomainError("pretrain: sequence " + seq.seq_id + " has no ground truth");
        TrainingSetOptions o;
        o.admission = admission;
        auto part = make_training_set(seq, *seq.ground_truth, cfg, o);
        all.nodes.insert(all.nodes.end(), part.nodes.begin(), part.nodes.end());
        all.edges.insert(all.edges.end(), part.edges.begin(), part.edges.end());
    }
    auto r = train_or_prior(all, opts);
    r.params.provenance = ParamsProvenance::synthetic_pretrain;
    return r;
}

SelfTrainReport self_train(const ScorerParams& pretrained, std::span<const Sequence> targets,
                           const HierarchyConfig& cfg, const SelfTrainOptions& opts) {
    if (opts.rounds < 1) throw ConfigError("self-training needs at least one round");
    HierarchyConfig solve_cfg = cfg;
    solve_cfg.max_interp_gap = 0;
    SelfTrainReport r;
    r.params = pretrained;
    for (int round = 0; round < opts.rounds; ++round) {
        TrainingSet all;
        r.pseudo_labels.clear();
        std::size_t tracks = 0;
        for (const auto& seq : targets) {
            const Sequence admitted = admit(seq, opts.admission);
            auto sol = solve_sequence(admitted, r.params, solve_cfg, ClampSet{});
            tracks += sol.clusters.size();
            r.pseudo_labels.push_back(sol.labels);
            if (sol.labels.entries.empty()) continue;
            TrainingSetOptions o;
            o.admission = opts.admission;
            o.iou_threshold = opts.iou_threshold;
            o.weighting = &r.params;
            auto part = make_training_set(admitted, sol.labels, solve_cfg, o);
            all.nodes.insert(all.nodes.end(), part.nodes.begin(), part.nodes.end());
            all.edges.insert(all.edges.end(), part.edges.begin(), part.edges.end());
        }
        if (tracks == 0) throw TrainingError("self-training aborted: the solver produced no tracks on the targets");
        ScorerParams next = r.params;
        if (has_both(all.nodes)) next.node_weights = train_head(all.nodes, r.params.node_weights, opts.train).weights;
        if (has_both(all.edges)) next.edge_weights = train_head(all.edges, r.params.edge_weights, opts.train).weights;
        r.params = std::move(next);
    }
    r.params.provenance = ParamsProvenance::pseudo_label_finetune;
    return r;
}

}  // namespace tracklabel
