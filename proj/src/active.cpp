#include "tracklabel/active.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "tracklabel/error.hpp"
#include "tracklabel/geometry.hpp"
#include "tracklabel/rng.hpp"

namespace tracklabel {

using nlohmann::json;

double entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("entropy: probability " + std::to_string(p) + " outside [0,1]");
    double h = 0.0;
    if (p > 0.0) h -= p * std::log(p);
    if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
    return h;
}

double node_uncertainty(DetId cluster_id, const LevelGraph& graph) {
    double best = 0.0;
    for (const auto& e : graph.edges) {
        if (e.clamp != EdgeClamp::none || (e.earlier != cluster_id && e.later != cluster_id)) continue;
        best = std::max(best, entropy(e.score));
    }
    return best;
}

double node_uncertainty(const ScoredNode& node) { return entropy(node.score); }

std::string_view to_string(BudgetPolicy p) {
    switch (p) {
        case BudgetPolicy::mot17_style: return "mot17-style";
        case BudgetPolicy::dancetrack_style: return "dancetrack-style";
        case BudgetPolicy::custom: return "custom";
    }
    return "mot17-style";
}

BudgetPolicy budget_policy_from_string(std::string_view s) {
    if (s == "mot17-style" || s == "mot17") return BudgetPolicy::mot17_style;
    if (s == "dancetrack-style" || s == "dancetrack") return BudgetPolicy::dancetrack_style;
    if (s == "custom") return BudgetPolicy::custom;
    throw ConfigError("unknown budget policy '" + std::string(s) + "'");
}

long BudgetLedger::spent_total() const {
    return std::accumulate(spent_levels.begin(), spent_levels.end(), spent_reserve);
}

void BudgetLedger::debit(int bucket, QueryKind kind, long cost) {
    if (cost < 0 || remaining(bucket) < cost)
        throw DomainError("budget bucket " + std::to_string(bucket) + " cannot cover " + std::to_string(cost) +
                          " clicks");
    if (bucket < 0)
        spent_reserve += cost;
    else
        spent_levels.at(static_cast<std::size_t>(bucket)) += cost;
    switch (kind) {
        case QueryKind::validate_node: spent_validate += cost; break;
        case QueryKind::refine_box: spent_refine += cost; break;
        case QueryKind::associate: spent_associate += cost; break;
    }
}

namespace {

// 50/30/20 over level groups; see allocate_budget.
void split_groups(long amount, std::vector<long>& levels) {
    const int L = static_cast<int>(levels.size());
    std::vector<std::vector<int>> groups(3);
    int next = L - 1;
    for (int g = 0; g < 2; ++g)
        for (int i = 0; i < 3 && next >= 0; ++i) groups[g].push_back(next--);
    for (; next >= 0; --next) groups[2].push_back(next);
    long pct[3] = {50, 30, 20};
    for (int g = 2; g > 0; --g)
        if (groups[g].empty()) {
            pct[g - 1] += pct[g];
            pct[g] = 0;
        }
    long totals[3];
    long used = 0;
    for (int g = 0; g < 3; ++g) {
        totals[g] = amount * pct[g] / 100;
        used += totals[g];
    }
    for (long rem = amount - used, g = 0; rem > 0; g = (g + 1) % 3)
        if (!groups[g].empty()) {
            ++totals[g];
            --rem;
        }
    for (int g = 0; g < 3; ++g) {
        const long n = static_cast<long>(groups[g].size());
        if (n == 0) continue;
        for (long i = 0; i < n; ++i)
            levels[static_cast<std::size_t>(groups[g][static_cast<std::size_t>(i)])] =
                totals[g] / n + (i < totals[g] % n ? 1 : 0);
    }
}

}  // namespace

BudgetLedger allocate_budget(long budget, int levels, BudgetPolicy policy, std::span<const double> weights,
                             double reserve_fraction) {
    if (budget < 0) throw DomainError("budget must be >= 0");
    if (levels < 1) throw ConfigError("need at least one level");
    BudgetLedger b;
    b.total = budget;
    b.levels.assign(static_cast<std::size_t>(levels), 0);
    b.spent_levels.assign(static_cast<std::size_t>(levels), 0);
    switch (policy) {
        case BudgetPolicy::mot17_style: split_groups(budget, b.levels); break;
        case BudgetPolicy::dancetrack_style:
            b.reserve = std::lround(0.3 * static_cast<double>(budget));
            split_groups(budget - b.reserve, b.levels);
            break;
        case BudgetPolicy::custom: {
            if (weights.size() != static_cast<std::size_t>(levels))
                throw ConfigError("custom budget needs one weight per level");
            if (!(reserve_fraction >= 0.0 && reserve_fraction <= 1.0))
                throw ConfigError("reserve fraction must be in [0,1]");
            double sum = 0.0;
            for (double w : weights) {
                if (!(w >= 0.0)) throw ConfigError("custom budget weights must be >= 0");
                sum += w;
            }
            if (!(sum > 0.0)) throw ConfigError("custom budget weights must not all be zero");
            b.reserve = std::lround(reserve_fraction * static_cast<double>(budget));
            const long rest = budget - b.reserve;
            long used = 0;
            for (int i = 0; i < levels; ++i) {
                b.levels[static_cast<std::size_t>(i)] =
                    static_cast<long>(std::floor(static_cast<double>(rest) * weights[static_cast<std::size_t>(i)] / sum));
                used += b.levels[static_cast<std::size_t>(i)];
            }
            for (long rem = rest - used, i = levels - 1; rem > 0; i = i == 0 ? levels - 1 : i - 1)
                if (weights[static_cast<std::size_t>(i)] > 0.0) {
                    ++b.levels[static_cast<std::size_t>(i)];
                    --rem;
                }
            break;
        }
    }
    return b;
}

std::string_view to_string(Acquisition a) {
    switch (a) {
        case Acquisition::spam: return "spam";
        case Acquisition::random: return "random";
        case Acquisition::entropy_image: return "entropy-image";
        case Acquisition::entropy_box: return "entropy-box";
        case Acquisition::coreset: return "coreset";
    }
    return "spam";
}

Acquisition acquisition_from_string(std::string_view s) {
    if (s == "spam") return Acquisition::spam;
    if (s == "random") return Acquisition::random;
    if (s == "entropy-image") return Acquisition::entropy_image;
    if (s == "entropy-box") return Acquisition::entropy_box;
    if (s == "coreset") return Acquisition::coreset;
    throw ConfigError("unknown acquisition '" + std::string(s) + "'");
}

std::vector<std::size_t> k_center(const std::vector<std::vector<double>>& points, std::size_t k,
                                  std::size_t seed_point) {
    std::vector<std::size_t> picks;
    if (points.empty() || k == 0) return picks;
    auto dist = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t i = 0; i < points[a].size(); ++i) {
            const double d = points[a][i] - points[b][i];
            s += d * d;
        }
        return std::sqrt(s);
    };
    seed_point = std::min(seed_point, points.size() - 1);
    std::vector<double> nearest(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) nearest[i] = dist(i, seed_point);
    std::vector<char> taken(points.size(), 0);
    while (picks.size() < std::min(k, points.size())) {
        std::size_t best = points.size();
        for (std::size_t i = 0; i < points.size(); ++i)
            if (!taken[i] && (best == points.size() || nearest[i] > nearest[best])) best = i;
        taken[best] = 1;
        picks.push_back(best);
        // The seed point stops counting once the first pick is made.
        for (std::size_t i = 0; i < points.size(); ++i)
            nearest[i] = picks.size() == 1 ? dist(i, best) : std::min(nearest[i], dist(i, best));
    }
    return picks;
}

std::uint64_t random_priority(std::uint64_t seed, int level, DetId id) {
    return Rng::mix(Rng::mix(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(level))),
                    static_cast<std::uint64_t>(id));
}

std::vector<AnnotationQuery> select_node_queries(std::span<const ScoredNode> nodes, std::span<const Detection> dets,
                                                 const BudgetLedger& ledger, Acquisition acq, std::uint64_t seed) {
    std::map<DetId, const Detection*> det_of;
    for (const auto& d : dets) det_of[d.det_id] = &d;
    std::vector<const ScoredNode*> open;
    for (const auto& n : nodes)
        if (n.clamp == NodeClamp::none) open.push_back(&n);
    std::sort(open.begin(), open.end(), [](const ScoredNode* a, const ScoredNode* b) { return a->det_id < b->det_id; });

    const std::size_t n_validate = static_cast<std::size_t>(std::max(0L, ledger.remaining(0)));
    std::vector<const ScoredNode*> chosen;
    switch (acq) {
        case Acquisition::spam:
        case Acquisition::entropy_box: {
            chosen = open;
            std::stable_sort(chosen.begin(), chosen.end(), [](const ScoredNode* a, const ScoredNode* b) {
                return node_uncertainty(*a) > node_uncertainty(*b);
            });
            break;
        }
        case Acquisition::random: {
            chosen = open;
            std::sort(chosen.begin(), chosen.end(), [&](const ScoredNode* a, const ScoredNode* b) {
                return random_priority(seed, 0, a->det_id) < random_priority(seed, 0, b->det_id);
            });
            break;
        }
        case Acquisition::entropy_image: {
            std::map<int, std::vector<const ScoredNode*>> frames;
            for (const auto* n : open) frames[n->frame].push_back(n);
            std::vector<std::pair<double, int>> ranked;
            for (const auto& [f, ns] : frames) {
                double h = 0.0;
                for (const auto* n : ns) h += node_uncertainty(*n);
                ranked.emplace_back(h / static_cast<double>(ns.size()), f);
            }
            std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            for (const auto& [h, f] : ranked)
                for (const auto* n : frames[f]) chosen.push_back(n);
            break;
        }
        case Acquisition::coreset: {
            std::vector<std::vector<double>> pts;
            for (const auto* n : open) pts.emplace_back(n->features.begin(), n->features.end());
            const std::size_t start = open.empty() ? 0 : static_cast<std::size_t>(Rng::mix(seed, 0) % open.size());
            for (std::size_t i : k_center(pts, n_validate, start)) chosen.push_back(open[i]);
            break;
        }
    }
    if (chosen.size() > n_validate) chosen.resize(n_validate);

    std::vector<AnnotationQuery> out;
    for (const auto* n : chosen) {
        AnnotationQuery q;
        q.kind = QueryKind::validate_node;
        q.subject = n->det_id;
        q.members = {n->det_id};
        q.uncertainty = node_uncertainty(*n);
        q.level = 0;
        q.cost = query_cost(q.kind);
        q.bucket = 0;
        out.push_back(std::move(q));
    }

    const std::size_t n_refine = static_cast<std::size_t>(std::max(0L, ledger.remaining(-1)) / 2);
    if (n_refine > 0) {
        std::vector<const ScoredNode*> order;
        for (const auto& n : nodes)
            if (n.clamp != NodeClamp::forced_invalid && det_of.count(n.det_id) &&
                det_of[n.det_id]->source != DetectionSource::annotator_refined)
                order.push_back(&n);
        if (acq == Acquisition::random) {
            std::sort(order.begin(), order.end(), [&](const ScoredNode* a, const ScoredNode* b) {
                return random_priority(seed, -1, a->det_id) < random_priority(seed, -1, b->det_id);
            });
        } else {
            // Accepted boxes by ascending detector confidence, then the rest
            // by descending score.
            std::sort(order.begin(), order.end(), [&](const ScoredNode* a, const ScoredNode* b) {
                if (a->accepted != b->accepted) return a->accepted;
                if (a->accepted) {
                    const double ca = det_of[a->det_id]->confidence, cb = det_of[b->det_id]->confidence;
                    if (ca != cb) return ca < cb;
                } else if (a->score != b->score) {
                    return a->score > b->score;
                }
                return a->det_id < b->det_id;
            });
        }
        if (order.size() > n_refine) order.resize(n_refine);
        for (const auto* n : order) {
            AnnotationQuery q;
            q.kind = QueryKind::refine_box;
            q.subject = n->det_id;
            q.members = {n->det_id};
            q.uncertainty = node_uncertainty(*n);
            q.level = 0;
            q.cost = query_cost(q.kind);
            q.bucket = -1;
            out.push_back(std::move(q));
        }
    }
    return out;
}

std::vector<AnnotationQuery> select_edge_queries(std::span<const LevelGraph* const> graphs, int level,
                                                 const BudgetLedger& ledger, Acquisition acq, std::uint64_t seed) {
    struct Subject {
        const LevelGraph* graph;
        const Cluster* cluster;
        double uncertainty;
    };
    std::vector<Subject> subjects;
    for (const auto* g : graphs) {
        std::set<DetId> touched;
        for (const auto& e : g->edges)
            if (e.clamp == EdgeClamp::none) {
                touched.insert(e.earlier);
                touched.insert(e.later);
            }
        for (const auto& c : g->nodes)
            if (touched.count(c.id)) subjects.push_back(Subject{g, &c, node_uncertainty(c.id, *g)});
    }
    if (acq == Acquisition::spam || acq == Acquisition::coreset) {
        std::sort(subjects.begin(), subjects.end(), [](const Subject& a, const Subject& b) {
            if (a.uncertainty != b.uncertainty) return a.uncertainty > b.uncertainty;
            return a.cluster->id < b.cluster->id;
        });
    } else {
        std::sort(subjects.begin(), subjects.end(), [&](const Subject& a, const Subject& b) {
            return random_priority(seed, level, a.cluster->id) < random_priority(seed, level, b.cluster->id);
        });
    }
    const std::size_t n = static_cast<std::size_t>(std::max(0L, ledger.remaining(level)));
    if (subjects.size() > n) subjects.resize(n);

    std::vector<AnnotationQuery> out;
    for (const auto& s : subjects) {
        AnnotationQuery q;
        q.kind = QueryKind::associate;
        q.subject = s.cluster->id;
        q.members = s.cluster->members;
        q.uncertainty = s.uncertainty;
        q.level = level;
        q.cost = query_cost(q.kind);
        q.bucket = level;
        for (const auto& e : s.graph->edges) {
            if (e.clamp != EdgeClamp::none) continue;
            DetId other = 0;
            if (e.earlier == s.cluster->id)
                other = e.later;
            else if (e.later == s.cluster->id)
                other = e.earlier;
            else
                continue;
            q.candidates.push_back(QueryCandidate{other, e.score, s.graph->find(other)->members});
        }
        std::sort(q.candidates.begin(), q.candidates.end(), [](const QueryCandidate& a, const QueryCandidate& b) {
            return a.score != b.score ? a.score > b.score : a.cluster_id < b.cluster_id;
        });
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<std::pair<DetId, NodeClamp>> validate_effects(const AnnotationQuery& q, bool accept) {
    const NodeClamp state = accept ? NodeClamp::forced_valid : NodeClamp::forced_invalid;
    std::vector<std::pair<DetId, NodeClamp>> out;
    if (q.members.empty()) out.emplace_back(q.subject, state);
    for (DetId m : q.members) out.emplace_back(m, state);
    return out;
}

LabelingSession::LabelingSession(Sequence target, ScorerParams params, LabelingOptions opts, BudgetLedger ledger)
    : seq_(std::move(target)), params_(std::move(params)), opts_(std::move(opts)), ledger_(std::move(ledger)) {
    opts_.hierarchy.validate();
    if (static_cast<int>(ledger_.levels.size()) != opts_.hierarchy.level_count())
        throw ConfigError("budget has " + std::to_string(ledger_.levels.size()) + " levels, hierarchy has " +
                          std::to_string(opts_.hierarchy.level_count()));
    seq_.validate();
    index_ = index_detections(seq_.detections);
    ctx_ = context_for(seq_);
    clips_ = split_clips(seq_.frame_count, opts_.hierarchy);
    clip_dets_.resize(clips_.size());
    for (std::size_t i = 0; i < seq_.detections.size(); ++i) {
        const int f = seq_.detections[i].frame;
        for (std::size_t c = 0; c < clips_.size(); ++c)
            if (f >= clips_[c].first_frame && f <= clips_[c].last_frame) clip_dets_[c].push_back(i);
    }
    results_.resize(clips_.size());
    for (std::size_t c = 0; c < clips_.size(); ++c) results_[c].clip = clips_[c];
    start_level();
    advance();
}

std::vector<Detection> LabelingSession::clip_detections(std::size_t clip) const {
    std::vector<Detection> out;
    for (std::size_t i : clip_dets_[clip]) out.push_back(seq_.detections[i]);
    return out;
}

void LabelingSession::log(const json& record) { audit_.push_back(record.dump()); }

void LabelingSession::solve_nodes() {
    nodes_.assign(clips_.size(), {});
    for (std::size_t c = 0; c < clips_.size(); ++c)
        nodes_[c] = validate_nodes(clip_detections(c), params_, opts_.hierarchy, clamps_, ctx_);
}

void LabelingSession::build_graphs() {
    graphs_.clear();
    const int span = opts_.hierarchy.edge_level_spans[static_cast<std::size_t>(level_ - 1)];
    for (std::size_t c = 0; c < clips_.size(); ++c)
        graphs_.push_back(build_level_graph(clusters_[c], level_, span, clips_[c].first_frame, params_,
                                            opts_.hierarchy.k, clamps_, index_));
}

void LabelingSession::start_level() {
    std::vector<AnnotationQuery> qs;
    json rec = {{"event", "level"}, {"level", level_}};
    if (level_ == 0) {
        solve_nodes();
        std::vector<ScoredNode> all;
        for (const auto& ns : nodes_) all.insert(all.end(), ns.begin(), ns.end());
        qs = select_node_queries(all, seq_.detections, ledger_, opts_.acquisition, opts_.seed);
    } else {
        rec["span"] = opts_.hierarchy.edge_level_spans[static_cast<std::size_t>(level_ - 1)];
        build_graphs();
        std::vector<const LevelGraph*> ptrs;
        for (const auto& g : graphs_) ptrs.push_back(&g);
        qs = select_edge_queries(ptrs, level_, ledger_, opts_.acquisition, opts_.seed);
    }
    log(rec);
    batch_.clear();
    open_.clear();
    for (auto& q : qs) {
        q.query_id = "q" + std::to_string(++serial_);
        open_.emplace(q.query_id, batch_.size());
        log({{"event", "query"}, {"query", to_json(q)}});
        batch_.push_back(std::move(q));
    }
}

void LabelingSession::finish_level() {
    if (level_ == 0) {
        solve_nodes();
        clusters_.assign(clips_.size(), {});
        for (std::size_t c = 0; c < clips_.size(); ++c) {
            clusters_[c] = initial_clusters(nodes_[c], index_);
            results_[c].nodes = nodes_[c];
            results_[c].levels.clear();
        }
        return;
    }
    build_graphs();
    for (std::size_t c = 0; c < clips_.size(); ++c) {
        clusters_[c] = solve_level(graphs_[c], index_).clusters;
        results_[c].levels.push_back(graphs_[c]);
        results_[c].clusters = clusters_[c];
    }
}

void LabelingSession::advance() {
    while (!complete_ && open_.empty()) {
        finish_level();
        ++level_;
        if (level_ >= opts_.hierarchy.level_count()) {
            final_clusters_ = link_clips(clusters_, params_, opts_.hierarchy, clamps_, index_);
            final_labels_ = extract_labels(final_clusters_, index_, seq_.seq_id, opts_.hierarchy.max_interp_gap);
            complete_ = true;
            batch_.clear();
            log({{"event", "complete"}, {"clicks", ledger_.spent_total()}});
            return;
        }
        start_level();
    }
}

std::vector<AnnotationQuery> LabelingSession::pending(std::size_t limit) const {
    std::vector<AnnotationQuery> out;
    for (const auto& q : batch_) {
        if (out.size() >= limit) break;
        if (open_.count(q.query_id)) out.push_back(q);
    }
    return out;
}

const AnnotationQuery& LabelingSession::open_query(const std::string& id) const {
    auto it = open_.find(id);
    if (it == open_.end()) {
        if (closed_.count(id)) throw ProtocolError("query " + id + " was already answered or skipped");
        throw ProtocolError("query " + id + " is not pending");
    }
    return batch_[it->second];
}

long LabelingSession::submit(const AnnotatorResponse& r) {
    struct NodeEffect {
        DetId id;
        NodeClamp state;
    };
    struct EdgeEffect {
        DetId a, b;
        EdgeClamp state;
    };
    std::vector<NodeEffect> node_fx;
    std::vector<EdgeEffect> edge_fx;
    std::optional<Box> new_box;
    const AnnotationQuery* qp = nullptr;
    try {
        qp = &open_query(r.query_id);
        const auto& q = *qp;
        if (r.kind != q.kind) throw ProtocolError("response kind does not match query " + q.query_id);
        switch (q.kind) {
            case QueryKind::validate_node:
                for (const auto& [id, state] : validate_effects(q, r.accept)) node_fx.push_back({id, state});
                break;
            case QueryKind::refine_box:
                if (r.accept && r.box) {
                    if (!r.box->valid()) throw ProtocolError("refined box must have positive size");
                    new_box = *r.box;
                    node_fx.push_back({q.subject, NodeClamp::forced_valid});
                } else {
                    node_fx.push_back({q.subject, NodeClamp::forced_invalid});
                }
                break;
            case QueryKind::associate: {
                if (r.choice && std::none_of(q.candidates.begin(), q.candidates.end(),
                                             [&](const QueryCandidate& c) { return c.cluster_id == *r.choice; }))
                    throw ProtocolError("choice " + std::to_string(*r.choice) + " is not a candidate of " + q.query_id);
                // Effective clamps of this level's edges: the state at graph
                // construction plus clamps added by this batch, which are keyed
                // by the cluster ids of the edge.
                const LevelGraph* graph = nullptr;
                for (const auto& g : graphs_)
                    if (g.find(q.subject)) graph = &g;
                if (!graph) throw ProtocolError("query " + q.query_id + " refers to a cluster outside this level");
                std::map<ClampSet::EdgeKey, EdgeClamp> eff;
                for (const auto& e : graph->edges) {
                    EdgeClamp c = e.clamp;
                    if (c == EdgeClamp::none) c = clamps_.edge(e.earlier, e.later);
                    eff[ClampSet::key(e.earlier, e.later)] = c;
                }
                std::map<DetId, DetId> on_partner;
                std::map<DetId, EdgeClamp> state;
                for (const auto& [key, c] : eff) {
                    if (c == EdgeClamp::forced_on) {
                        on_partner[key.first] = key.second;
                        on_partner[key.second] = key.first;
                    }
                    if (key.first == q.subject) state[key.second] = c;
                    if (key.second == q.subject) state[key.first] = c;
                }
                auto clamp_of = [&](DetId other) {
                    auto it = state.find(other);
                    return it == state.end() ? EdgeClamp::none : it->second;
                };
                if (r.choice) {
                    const DetId c = *r.choice;
                    if (clamp_of(c) == EdgeClamp::forced_off)
                        throw ConflictError("edge " + std::to_string(q.subject) + "-" + std::to_string(c) +
                                            " is clamped forced-off");
                    for (DetId end : {q.subject, c}) {
                        auto it = on_partner.find(end);
                        if (it != on_partner.end() && it->second != (end == c ? q.subject : c))
                            throw ConflictError("cluster " + std::to_string(end) + " is already linked to " +
                                                std::to_string(it->second) + " by a forced-on clamp");
                    }
                    edge_fx.push_back({q.subject, c, EdgeClamp::forced_on});
                }
                for (const auto& cand : q.candidates) {
                    if (r.choice && cand.cluster_id == *r.choice) continue;
                    const EdgeClamp s = clamp_of(cand.cluster_id);
                    if (s == EdgeClamp::forced_on)
                        throw ConflictError("edge " + std::to_string(q.subject) + "-" +
                                            std::to_string(cand.cluster_id) + " is clamped forced-on");
                    if (s == EdgeClamp::none) edge_fx.push_back({q.subject, cand.cluster_id, EdgeClamp::forced_off});
                }
                break;
            }
        }
        for (const auto& fx : node_fx) clamps_.check_node(fx.id, fx.state);
        for (const auto& fx : edge_fx) clamps_.check_edge(fx.a, fx.b, fx.state);
        if (ledger_.remaining(q.bucket) < q.cost)
            throw ProtocolError("budget bucket " + std::to_string(q.bucket) + " is exhausted");
    } catch (const Error& e) {
        log({{"event", "rejected"},
             {"query_id", r.query_id},
             {"reason", e.what()},
             {"error", e.kind()},
             {"response", to_json(r)}});
        throw;
    }

    const auto& q = *qp;
    json effects = json::array();
    for (const auto& fx : node_fx) {
        clamps_.set_node(fx.id, fx.state, q.query_id);
        effects.push_back({{"target", "node"}, {"id", fx.id}, {"state", to_string(fx.state)}});
    }
    for (const auto& fx : edge_fx) {
        clamps_.set_edge(fx.a, fx.b, fx.state, q.query_id);
        effects.push_back({{"target", "edge"}, {"a", fx.a}, {"b", fx.b}, {"state", to_string(fx.state)}});
    }
    if (new_box) {
        auto& det = const_cast<Detection&>(*index_.at(q.subject));
        det.box = *new_box;
        det.source = DetectionSource::annotator_refined;
        effects.push_back({{"target", "box"}, {"id", q.subject}, {"box", to_json(*new_box)}});
    }
    ledger_.debit(q.bucket, q.kind, q.cost);
    const long cost = q.cost;
    log({{"event", "response"},
         {"query_id", q.query_id},
         {"response", to_json(r)},
         {"clicks", cost},
         {"bucket", q.bucket},
         {"effects", effects}});
    closed_[q.query_id] = true;
    open_.erase(q.query_id);
    advance();
    return cost;
}

void LabelingSession::skip(const std::string& query_id) {
    open_query(query_id);
    open_.erase(query_id);
    closed_[query_id] = false;
    log({{"event", "skip"}, {"query_id", query_id}});
    advance();
}

LabelSet LabelingSession::labels() const {
    if (complete_) return final_labels_;
    const auto& cfg = opts_.hierarchy;
    std::vector<std::vector<Cluster>> per_clip;
    if (level_ == 0) {
        for (std::size_t c = 0; c < clips_.size(); ++c) {
            auto r = solve_hierarchy(clip_detections(c), clips_[c], params_, cfg, clamps_, ctx_, index_);
            per_clip.push_back(std::move(r.clusters));
        }
    } else {
        for (std::size_t c = 0; c < clips_.size(); ++c) {
            auto clusters = clusters_[c];
            for (int l = level_; l < cfg.level_count(); ++l) {
                auto g = build_level_graph(clusters, l, cfg.edge_level_spans[static_cast<std::size_t>(l - 1)],
                                           clips_[c].first_frame, params_, cfg.k, clamps_, index_);
                clusters = solve_level(g, index_).clusters;
            }
            per_clip.push_back(std::move(clusters));
        }
    }
    return extract_labels(link_clips(per_clip, params_, cfg, clamps_, index_), index_, seq_.seq_id,
                          cfg.max_interp_gap);
}

std::string LabelingSession::state_dump() const { return dump_state(results_); }

LabelingSession LabelingSession::replay(Sequence target, ScorerParams params, LabelingOptions opts,
                                        BudgetLedger ledger, std::span<const std::string> audit_lines) {
    LabelingSession s(std::move(target), std::move(params), std::move(opts), std::move(ledger));
    for (std::size_t i = 0; i < audit_lines.size(); ++i) {
        json rec;
        try {
            rec = json::parse(audit_lines[i]);
        } catch (const json::exception&) {
            throw ParseError("audit record is not JSON", static_cast<int>(i + 1));
        }
        const std::string ev = rec.value("event", "");
        if (ev == "response") {
            s.submit(response_from_json(rec.at("response")));
        } else if (ev == "skip") {
            s.skip(rec.at("query_id").get<std::string>());
        } else if (ev == "rejected" && rec.contains("response")) {
            try {
                s.submit(response_from_json(rec.at("response")));
            } catch (const Error&) {
                continue;
            }
            throw ParseError("audit replay diverged: a rejected response was accepted", static_cast<int>(i + 1));
        }
    }
    return s;
}

ClampSet replay_audit(std::span<const std::string> audit_lines) {
    ClampSet clamps;
    for (std::size_t i = 0; i < audit_lines.size(); ++i) {
        json rec;
        try {
            rec = json::parse(audit_lines[i]);
        } catch (const json::exception&) {
            throw ParseError("audit record is not JSON", static_cast<int>(i + 1));
        }
        if (rec.value("event", "") != "response") continue;
        const std::string qid = rec.at("query_id").get<std::string>();
        for (const auto& fx : rec.at("effects")) {
            const std::string target = fx.at("target").get<std::string>();
            if (target == "node")
                clamps.set_node(fx.at("id").get<DetId>(), node_clamp_from_string(fx.at("state").get<std::string>()),
                                qid);
            else if (target == "edge")
                clamps.set_edge(fx.at("a").get<DetId>(), fx.at("b").get<DetId>(),
                                edge_clamp_from_string(fx.at("state").get<std::string>()), qid);
        }
    }
    return clamps;
}

long audit_clicks(std::span<const std::string> audit_lines) {
    long total = 0;
    for (const auto& line : audit_lines) {
        const auto rec = json::parse(line);
        if (rec.value("event", "") == "response") total += rec.at("clicks").get<long>();
    }
    return total;
}

LabelingResult run_active_labeling(const Sequence& target, const ScorerParams& params, const LabelingOptions& opts,
                                   const BudgetLedger& ledger, Annotator& annotator) {
    LabelingSession session(target, params, opts, ledger);
    LabelingResult out;
    while (!session.complete()) {
        for (const auto& q : session.pending()) {
            auto r = annotator.answer(q);
            if (!r) {
                session.skip(q.query_id);
                ++out.skipped;
                continue;
            }
            try {
                session.submit(*r);
                ++out.answered;
            } catch (const ConflictError&) {
                ++out.rejected;
                session.skip(q.query_id);
            } catch (const ProtocolError&) {
                ++out.rejected;
                session.skip(q.query_id);
            }
        }
    }
    out.labels = session.labels();
    out.ledger = session.ledger();
    out.clamps = session.clamps();
    out.audit = session.audit();
    return out;
}

LabelSet interpolation_baseline(const Sequence& seq, double keep_ratio) {
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) throw DomainError("keep ratio must be in (0, 1]");
    if (!seq.ground_truth) throw DomainError("interpolation baseline needs ground truth");
    const int F = seq.frame_count;
    const long k = std::max(1L, static_cast<long>(std::ceil(keep_ratio * F - 1e-9)));
    std::set<int> kept;
    if (k == 1 || F == 1) {
        kept.insert(1);
    } else {
        for (long i = 0; i < k; ++i)
            kept.insert(1 + static_cast<int>(std::llround(static_cast<double>(i) * (F - 1) / static_cast<double>(k - 1))));
    }
    std::map<TrackId, std::vector<const LabelEntry*>> tracks;
    for (const auto& e : seq.ground_truth->entries)
        if (kept.count(e.frame)) tracks[e.track_id].push_back(&e);
    LabelSet out;
    out.seq_id = seq.seq_id;
    for (auto& [id, es] : tracks) {
        std::sort(es.begin(), es.end(), [](const LabelEntry* a, const LabelEntry* b) { return a->frame < b->frame; });
        for (std::size_t i = 0; i < es.size(); ++i) {
            LabelEntry e = *es[i];
            e.provenance = LabelProvenance::ground_truth;
            out.entries.push_back(e);
            if (i + 1 == es.size()) continue;
            const auto* a = es[i];
            const auto* b = es[i + 1];
            for (int f = a->frame + 1; f < b->frame; ++f) {
                LabelEntry m;
                m.frame = f;
                m.track_id = id;
                m.box = lerp(a->box, b->box, static_cast<double>(f - a->frame) / (b->frame - a->frame));
                m.provenance = LabelProvenance::interpolated;
                out.entries.push_back(m);
            }
        }
    }
    out.normalize();
    return out;
}

}  // namespace tracklabel
