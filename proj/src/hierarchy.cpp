#include "tracklabel/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "tracklabel/assignment.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/geometry.hpp"

namespace tracklabel {

void HierarchyConfig::validate() const {
    if (clip_length < 1) throw ConfigError("clip_length must be >= 1");
    if (node_level_window < 0) throw ConfigError("node_level_window must be >= 0");
    if (edge_level_spans.empty()) throw ConfigError("edge_level_spans must not be empty");
    if (edge_level_spans.front() != 2) throw ConfigError("edge_level_spans must start at 2");
    for (std::size_t i = 1; i < edge_level_spans.size(); ++i)
        if (edge_level_spans[i] != 2 * edge_level_spans[i - 1]) throw ConfigError("edge_level_spans must double");
    if (edge_level_spans.back() != clip_length) throw ConfigError("clip_length must equal the last span");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(node_accept_threshold > 0.0 && node_accept_threshold < 1.0))
        throw ConfigError("node_accept_threshold must be in (0,1)");
    if (max_interp_gap < 0) throw ConfigError("max_interp_gap must be >= 0");
}

std::string_view to_string(NodeClamp c) {
    switch (c) {
        case NodeClamp::none: return "none";
        case NodeClamp::forced_valid: return "forced-valid";
        case NodeClamp::forced_invalid: return "forced-invalid";
    }
    return "none";
}

std::string_view to_string(EdgeClamp c) {
    switch (c) {
        case EdgeClamp::none: return "none";
        case EdgeClamp::forced_on: return "forced-on";
        case EdgeClamp::forced_off: return "forced-off";
    }
    return "none";
}

NodeClamp node_clamp_from_string(std::string_view s) {
    if (s == "none") return NodeClamp::none;
    if (s == "forced-valid") return NodeClamp::forced_valid;
    if (s == "forced-invalid") return NodeClamp::forced_invalid;
    throw ParseError("unknown node clamp '" + std::string(s) + "'", 0);
}

EdgeClamp edge_clamp_from_string(std::string_view s) {
    if (s == "none") return EdgeClamp::none;
    if (s == "forced-on") return EdgeClamp::forced_on;
    if (s == "forced-off") return EdgeClamp::forced_off;
    throw ParseError("unknown edge clamp '" + std::string(s) + "'", 0);
}

void ClampSet::check_node(DetId id, NodeClamp state) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end() || state == NodeClamp::none || it->second.state == state) return;
    throw ConflictError("node " + std::to_string(id) + " is already " + std::string(to_string(it->second.state)) +
                        " by response " + it->second.response_id + ", cannot set " + std::string(to_string(state)));
}

void ClampSet::check_edge(DetId a, DetId b, EdgeClamp state) const {
    auto it = edges_.find(key(a, b));
    if (it == edges_.end() || state == EdgeClamp::none || it->second.state == state) return;
    throw ConflictError("edge " + std::to_string(a) + "-" + std::to_string(b) + " is already " +
                        std::string(to_string(it->second.state)) + " by response " + it->second.response_id +
                        ", cannot set " + std::string(to_string(state)));
}

void ClampSet::set_node(DetId id, NodeClamp state, const std::string& response_id) {
    if (state == NodeClamp::none) return;
    check_node(id, state);
    nodes_.emplace(id, NodeRecord{state, response_id});
}

void ClampSet::set_edge(DetId a, DetId b, EdgeClamp state, const std::string& response_id) {
    if (state == EdgeClamp::none) return;
    if (a == b) throw DomainError("edge clamp needs two distinct clusters");
    check_edge(a, b, state);
    edges_.emplace(key(a, b), EdgeRecord{state, response_id});
}

NodeClamp ClampSet::node(DetId id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? NodeClamp::none : it->second.state;
}

EdgeClamp ClampSet::edge(DetId a, DetId b) const {
    auto it = edges_.find(key(a, b));
    return it == edges_.end() ? EdgeClamp::none : it->second.state;
}

DetectionIndex index_detections(std::span<const Detection> dets) {
    DetectionIndex idx;
    idx.reserve(dets.size());
    for (const auto& d : dets) idx.emplace(d.det_id, &d);
    return idx;
}

namespace {

const Detection& lookup(const DetectionIndex& index, DetId id) {
    auto it = index.find(id);
    if (it == index.end()) throw DomainError("unknown det_id " + std::to_string(id));
    return *it->second;
}

}  // namespace

Cluster make_cluster(std::vector<DetId> members, int level, const DetectionIndex& index) {
    Cluster c;
    c.level = level;
    std::vector<const Detection*> dets;
    dets.reserve(members.size());
    for (DetId id : members) dets.push_back(&lookup(index, id));
    std::sort(dets.begin(), dets.end(), [](const Detection* a, const Detection* b) {
        return a->frame != b->frame ? a->frame < b->frame : a->det_id < b->det_id;
    });
    for (std::size_t i = 1; i < dets.size(); ++i)
        if (dets[i]->frame == dets[i - 1]->frame)
            throw DomainError("cluster members " + std::to_string(dets[i - 1]->det_id) + " and " +
                              std::to_string(dets[i]->det_id) + " share frame " + std::to_string(dets[i]->frame));
    for (const auto* d : dets) c.members.push_back(d->det_id);
    if (!dets.empty()) {
        c.id = *std::min_element(c.members.begin(), c.members.end());
        c.first_frame = dets.front()->frame;
        c.last_frame = dets.back()->frame;
    }
    c.summary = summarize(dets);
    return c;
}

const Cluster* LevelGraph::find(DetId cluster_id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), cluster_id,
                               [](const Cluster& c, DetId id) { return c.id < id; });
    return it != nodes.end() && it->id == cluster_id ? &*it : nullptr;
}

std::pair<int, int> LevelGraph::place(const Cluster& c) const {
    const int offset = c.first_frame - clip_first;
    return {offset / span, (offset % span) < span / 2 ? 0 : 1};
}

std::vector<Clip> split_clips(int frame_count, const HierarchyConfig& cfg) {
    std::vector<Clip> clips;
    for (int f = 1; f <= frame_count; f += cfg.clip_length)
        clips.push_back(Clip{f, std::min(frame_count, f + cfg.clip_length - 1)});
    return clips;
}

SolveContext context_for(const Sequence& seq) {
    return SolveContext{FrameBounds{0.0, 0.0, static_cast<double>(seq.image_width),
                                    static_cast<double>(seq.image_height)},
                        std::max(1, seq.frame_count)};
}

std::vector<ScoredNode> validate_nodes(std::span<const Detection> clip_dets, const ScorerParams& params,
                                       const HierarchyConfig& cfg, const ClampSet& clamps,
                                       const SolveContext& ctx) {
    const auto feats = node_features(clip_dets, ctx.bounds, ctx.frame_count, cfg.node_level_window / 2);
    std::vector<ScoredNode> out(clip_dets.size());
    for (std::size_t i = 0; i < clip_dets.size(); ++i) {
        auto& n = out[i];
        n.det_id = clip_dets[i].det_id;
        n.frame = clip_dets[i].frame;
        n.features = feats[i];
        n.score = score_node(feats[i], params);
        n.clamp = clamps.node(n.det_id);
        n.accepted = n.clamp == NodeClamp::forced_valid ||
                     (n.clamp == NodeClamp::none && n.score >= cfg.node_accept_threshold);
    }
    return out;
}

std::vector<Cluster> initial_clusters(std::span<const ScoredNode> nodes, const DetectionIndex& index) {
    std::vector<Cluster> out;
    for (const auto& n : nodes)
        if (n.accepted) out.push_back(make_cluster({n.det_id}, 0, index));
    std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) { return a.id < b.id; });
    return out;
}

namespace {

double embedding_similarity(const Cluster& a, const Cluster& b) {
    if (a.summary.mean_embedding.empty() || b.summary.mean_embedding.empty()) return 0.0;
    return cosine_similarity(a.summary.mean_embedding, b.summary.mean_embedding);
}

// K best partners of `from` among `others`: higher similarity, then smaller
// gap, then lower id.
std::vector<std::size_t> top_k(const Cluster& from, const std::vector<const Cluster*>& others, bool from_is_earlier,
                               int k) {
    struct Rank {
        double sim;
        int gap;
        DetId id;
        std::size_t index;
    };
    std::vector<Rank> ranks;
    ranks.reserve(others.size());
    for (std::size_t i = 0; i < others.size(); ++i) {
        const Cluster& o = *others[i];
        const int gap = from_is_earlier ? o.first_frame - from.last_frame : from.first_frame - o.last_frame;
        ranks.push_back(Rank{embedding_similarity(from, o), std::abs(gap), o.id, i});
    }
    std::sort(ranks.begin(), ranks.end(), [](const Rank& a, const Rank& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        if (a.gap != b.gap) return a.gap < b.gap;
        return a.id < b.id;
    });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ranks.size() && static_cast<int>(i) < k; ++i) out.push_back(ranks[i].index);
    return out;
}

std::vector<Cluster> prune_invalid(const std::vector<Cluster>& clusters, const ClampSet& clamps,
                                   const DetectionIndex& index) {
    std::vector<Cluster> out;
    out.reserve(clusters.size());
    for (const auto& c : clusters) {
        std::vector<DetId> keep;
        for (DetId m : c.members)
            if (clamps.node(m) != NodeClamp::forced_invalid) keep.push_back(m);
        if (keep.size() == c.members.size()) {
            out.push_back(c);
        } else if (!keep.empty()) {
            out.push_back(make_cluster(std::move(keep), c.level, index));
        }
    }
    std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) { return a.id < b.id; });
    return out;
}

// Bipartite candidate edges between `left` and `right` with clamps applied.
// `owner` maps member det_ids to clusters of both sides.
std::vector<LevelEdge> candidate_edges(const std::vector<const Cluster*>& left,
                                       const std::vector<const Cluster*>& right, int window, int span,
                                       const ScorerParams& params, int k, const ClampSet& clamps,
                                       const std::unordered_map<DetId, const Cluster*>& owner) {
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < left.size(); ++i)
        for (std::size_t j : top_k(*left[i], right, true, k)) pairs.emplace(i, j);
    for (std::size_t j = 0; j < right.size(); ++j)
        for (std::size_t i : top_k(*right[j], left, false, k)) pairs.emplace(i, j);

    std::map<std::pair<DetId, DetId>, EdgeClamp> forced;
    if (!clamps.edges().empty()) {
        std::set<DetId> left_ids, right_ids;
        for (const auto* c : left) left_ids.insert(c->id);
        for (const auto* c : right) right_ids.insert(c->id);
        for (const auto& [key, rec] : clamps.edges()) {
            auto a = owner.find(key.first);
            auto b = owner.find(key.second);
            if (a == owner.end() || b == owner.end() || a->second == b->second) continue;
            DetId u = a->second->id, v = b->second->id;
            if (left_ids.count(v) && right_ids.count(u)) std::swap(u, v);
            if (!left_ids.count(u) || !right_ids.count(v)) continue;
            auto [it, inserted] = forced.emplace(std::pair{u, v}, rec.state);
            if (!inserted && it->second != rec.state)
                throw ConflictError("clusters " + std::to_string(u) + " and " + std::to_string(v) +
                                    " carry both forced-on and forced-off clamps");
        }
    }
    std::map<DetId, std::size_t> left_pos, right_pos;
    for (std::size_t i = 0; i < left.size(); ++i) left_pos[left[i]->id] = i;
    for (std::size_t j = 0; j < right.size(); ++j) right_pos[right[j]->id] = j;
    for (const auto& [uv, state] : forced)
        if (state == EdgeClamp::forced_on) pairs.emplace(left_pos[uv.first], right_pos[uv.second]);

    std::vector<LevelEdge> edges;
    edges.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
        LevelEdge e;
        e.earlier = left[i]->id;
        e.later = right[j]->id;
        e.window = window;
        e.features = edge_features(left[i]->summary, right[j]->summary, span);
        e.score = score_edge(e.features, params);
        auto f = forced.find({e.earlier, e.later});
        if (f != forced.end()) e.clamp = f->second;
        edges.push_back(e);
    }
    std::sort(edges.begin(), edges.end(), [](const LevelEdge& a, const LevelEdge& b) {
        return std::tie(a.earlier, a.later) < std::tie(b.earlier, b.later);
    });
    return edges;
}

double log_odds(double p) { return std::log(p / (1.0 - p)); }

// Selects edges of one bipartite subproblem; returns the objective.
double solve_window(std::vector<LevelEdge*>& edges) {
    std::map<DetId, const LevelEdge*> on_left, on_right;
    for (auto* e : edges) {
        if (e->clamp != EdgeClamp::forced_on) continue;
        auto clash = [&](std::map<DetId, const LevelEdge*>& side, DetId id) {
            auto [it, inserted] = side.emplace(id, e);
            if (!inserted)
                throw ConflictError("forced-on edges " + std::to_string(it->second->earlier) + "-" +
                                    std::to_string(it->second->later) + " and " + std::to_string(e->earlier) + "-" +
                                    std::to_string(e->later) + " share cluster " + std::to_string(id));
        };
        clash(on_left, e->earlier);
        clash(on_right, e->later);
    }
    for (auto* e : edges) e->selected = e->clamp == EdgeClamp::forced_on;

    std::map<DetId, int> rows, cols;
    std::vector<LevelEdge*> eligible;
    for (auto* e : edges) {
        if (e->clamp != EdgeClamp::none || !(e->score > 0.5)) continue;
        if (on_left.count(e->earlier) || on_right.count(e->later)) continue;
        eligible.push_back(e);
        rows.emplace(e->earlier, 0);
        cols.emplace(e->later, 0);
    }
    if (eligible.empty()) return 0.0;
    int r = 0;
    for (auto& [id, i] : rows) i = r++;
    int c = 0;
    for (auto& [id, j] : cols) j = c++;
    WeightMatrix w(rows.size(), std::vector<std::optional<double>>(cols.size()));
    std::vector<std::vector<LevelEdge*>> at(rows.size(), std::vector<LevelEdge*>(cols.size(), nullptr));
    for (auto* e : eligible) {
        const int i = rows[e->earlier], j = cols[e->later];
        w[i][j] = log_odds(e->score);
        at[i][j] = e;
    }
    const auto m = max_weight_matching(w);
    for (const auto& [i, j] : m.pairs) at[i][j]->selected = true;
    return m.total;
}

std::vector<Cluster> merge_selected(const std::vector<Cluster>& nodes, const std::vector<LevelEdge>& edges,
                                    int level, const DetectionIndex& index) {
    std::map<DetId, DetId> partner;  // earlier -> later
    std::set<DetId> absorbed;
    for (const auto& e : edges) {
        if (!e.selected) continue;
        partner[e.earlier] = e.later;
        absorbed.insert(e.later);
    }
    std::map<DetId, const Cluster*> by_id;
    for (const auto& c : nodes) by_id[c.id] = &c;
    std::vector<Cluster> out;
    for (const auto& c : nodes) {
        if (absorbed.count(c.id)) continue;
        auto it = partner.find(c.id);
        if (it == partner.end()) {
            Cluster copy = c;
            copy.level = level;
            out.push_back(std::move(copy));
            continue;
        }
        std::vector<DetId> members = c.members;
        const auto& other = by_id.at(it->second)->members;
        members.insert(members.end(), other.begin(), other.end());
        out.push_back(make_cluster(std::move(members), level, index));
    }
    std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) { return a.id < b.id; });
    return out;
}

}  // namespace

LevelGraph build_level_graph(const std::vector<Cluster>& clusters, int level, int span, int clip_first,
                             const ScorerParams& params, int k, const ClampSet& clamps,
                             const DetectionIndex& index) {
    LevelGraph g;
    g.level = level;
    g.span = span;
    g.clip_first = clip_first;
    g.nodes = prune_invalid(clusters, clamps, index);

    std::unordered_map<DetId, const Cluster*> owner;
    for (const auto& c : g.nodes)
        for (DetId m : c.members) owner.emplace(m, &c);

    std::map<int, std::pair<std::vector<const Cluster*>, std::vector<const Cluster*>>> windows;
    for (const auto& c : g.nodes) {
        const auto [w, side] = g.place(c);
        const int end_offset = c.last_frame - clip_first;
        if (end_offset / span != w || (side == 0 && (end_offset % span) >= span / 2))
            throw DomainError("cluster " + std::to_string(c.id) + " straddles a window half at span " +
                              std::to_string(span));
        (side == 0 ? windows[w].first : windows[w].second).push_back(&c);
    }
    for (const auto& [w, halves] : windows) {
        if (halves.first.empty() || halves.second.empty()) continue;
        auto edges = candidate_edges(halves.first, halves.second, w, span, params, k, clamps, owner);
        g.edges.insert(g.edges.end(), edges.begin(), edges.end());
    }
    return g;
}

LevelSolution solve_level(LevelGraph& graph, const DetectionIndex& index) {
    LevelSolution sol;
    std::map<int, std::vector<LevelEdge*>> by_window;
    for (auto& e : graph.edges) by_window[e.window].push_back(&e);
    for (auto& [w, edges] : by_window) sol.objective += solve_window(edges);
    sol.clusters = merge_selected(graph.nodes, graph.edges, graph.level, index);
    return sol;
}

HierarchyResult solve_hierarchy(std::span<const Detection> clip_dets, const Clip& clip, const ScorerParams& params,
                                const HierarchyConfig& cfg, const ClampSet& clamps, const SolveContext& ctx,
                                const DetectionIndex& index) {
    HierarchyResult r;
    r.clip = clip;
    r.nodes = validate_nodes(clip_dets, params, cfg, clamps, ctx);
    r.clusters = initial_clusters(r.nodes, index);
    int level = 1;
    for (int span : cfg.edge_level_spans) {
        LevelGraph g = build_level_graph(r.clusters, level, span, clip.first_frame, params, cfg.k, clamps, index);
        r.clusters = solve_level(g, index).clusters;
        r.levels.push_back(std::move(g));
        ++level;
    }
    return r;
}

std::vector<Cluster> link_clips(const std::vector<std::vector<Cluster>>& per_clip, const ScorerParams& params,
                                const HierarchyConfig& cfg, const ClampSet& clamps, const DetectionIndex& index) {
    std::vector<Cluster> all;
    for (const auto& clip : per_clip)
        for (const auto& c : clip) all.push_back(c);
    if (per_clip.size() < 2) {
        std::sort(all.begin(), all.end(), [](const Cluster& a, const Cluster& b) { return a.id < b.id; });
        return all;
    }
    std::unordered_map<DetId, const Cluster*> owner;
    for (const auto& c : all)
        for (DetId m : c.members) owner.emplace(m, &c);

    const int link_level = cfg.level_count();
    std::map<DetId, DetId> next;  // earlier cluster id -> later cluster id
    for (std::size_t i = 0; i + 1 < per_clip.size(); ++i) {
        std::vector<const Cluster*> left, right;
        for (const auto& c : per_clip[i]) left.push_back(&c);
        for (const auto& c : per_clip[i + 1]) right.push_back(&c);
        if (left.empty() || right.empty()) continue;
        auto edges = candidate_edges(left, right, static_cast<int>(i), 2 * cfg.clip_length, params, cfg.k, clamps,
                                     owner);
        std::vector<LevelEdge*> ptrs;
        for (auto& e : edges) ptrs.push_back(&e);
        solve_window(ptrs);
        for (const auto& e : edges)
            if (e.selected) next[e.earlier] = e.later;
    }
    std::set<DetId> has_prev;
    for (const auto& [a, b] : next) has_prev.insert(b);
    std::map<DetId, const Cluster*> by_id;
    for (const auto& c : all) by_id[c.id] = &c;
    std::vector<Cluster> out;
    for (const auto& [id, c] : by_id) {
        if (has_prev.count(id)) continue;
        std::vector<DetId> members = c->members;
        for (auto it = next.find(id); it != next.end(); it = next.find(it->second)) {
            const auto& m = by_id.at(it->second)->members;
            members.insert(members.end(), m.begin(), m.end());
        }
        out.push_back(make_cluster(std::move(members), link_level, index));
    }
    std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) { return a.id < b.id; });
    return out;
}

std::vector<Trajectory> to_trajectories(const std::vector<Cluster>& clusters, const DetectionIndex& index) {
    std::vector<const Cluster*> order;
    for (const auto& c : clusters)
        if (!c.members.empty()) order.push_back(&c);
    std::sort(order.begin(), order.end(), [&](const Cluster* a, const Cluster* b) {
        if (a->first_frame != b->first_frame) return a->first_frame < b->first_frame;
        return a->members.front() < b->members.front();
    });
    std::vector<Trajectory> out;
    TrackId next_id = 1;
    for (const auto* c : order) {
        Trajectory t;
        t.track_id = next_id++;
        t.members = c->members;
        (void)index;
        out.push_back(std::move(t));
    }
    return out;
}

LabelSet extract_labels(const std::vector<Cluster>& clusters, const DetectionIndex& index, const std::string& seq_id,
                        int max_gap) {
    LabelSet out;
    out.seq_id = seq_id;
    for (const auto& t : to_trajectories(clusters, index)) {
        const Detection* prev = nullptr;
        for (DetId id : t.members) {
            const Detection& d = lookup(index, id);
            if (prev) {
                const int gap = d.frame - prev->frame - 1;
                if (gap >= 1 && gap <= max_gap) {
                    for (int f = prev->frame + 1; f < d.frame; ++f) {
                        const double s = static_cast<double>(f - prev->frame) / (d.frame - prev->frame);
                        LabelEntry e;
                        e.frame = f;
                        e.track_id = t.track_id;
                        e.box = lerp(prev->box, d.box, s);
                        e.provenance = LabelProvenance::interpolated;
                        out.entries.push_back(e);
                    }
                }
            }
            LabelEntry e;
            e.frame = d.frame;
            e.track_id = t.track_id;
            e.box = d.box;
            e.provenance =
                d.source == DetectionSource::annotator_refined ? LabelProvenance::human : LabelProvenance::pseudo;
            out.entries.push_back(e);
            prev = &d;
        }
    }
    out.normalize();
    return out;
}

Sequence admit(const Sequence& seq, double threshold) {
    Sequence out = seq;
    out.detections.clear();
    for (const auto& d : seq.detections)
        if (d.confidence >= threshold) out.detections.push_back(d);
    return out;
}

SequenceSolution solve_sequence(const Sequence& seq, const ScorerParams& params, const HierarchyConfig& cfg,
                                const ClampSet& clamps) {
    cfg.validate();
    SequenceSolution sol;
    const auto index = index_detections(seq.detections);
    const auto ctx = context_for(seq);
    std::vector<std::vector<Cluster>> per_clip;
    for (const auto& clip : split_clips(seq.frame_count, cfg)) {
        std::vector<Detection> dets;
        for (const auto& d : seq.detections)
            if (d.frame >= clip.first_frame && d.frame <= clip.last_frame) dets.push_back(d);
        auto r = solve_hierarchy(dets, clip, params, cfg, clamps, ctx, index);
        per_clip.push_back(r.clusters);
        sol.clips.push_back(std::move(r));
    }
    sol.clusters = link_clips(per_clip, params, cfg, clamps, index);
    sol.labels = extract_labels(sol.clusters, index, seq.seq_id, cfg.max_interp_gap);
    return sol;
}

std::string dump_state(const std::vector<HierarchyResult>& clips) {
    using nlohmann::json;
    json out = json::array();
    for (const auto& r : clips) {
        json clip;
        clip["first_frame"] = r.clip.first_frame;
        clip["last_frame"] = r.clip.last_frame;
        json nodes = json::array();
        for (const auto& n : r.nodes)
            nodes.push_back({{"det_id", n.det_id},
                             {"frame", n.frame},
                             {"score", n.score},
                             {"clamp", to_string(n.clamp)},
                             {"accepted", n.accepted}});
        clip["nodes"] = std::move(nodes);
        json levels = json::array();
        for (const auto& g : r.levels) {
            json edges = json::array();
            for (const auto& e : g.edges)
                edges.push_back({{"earlier", e.earlier},
                                 {"later", e.later},
                                 {"window", e.window},
                                 {"score", e.score},
                                 {"clamp", to_string(e.clamp)},
                                 {"selected", e.selected}});
            json clusters = json::array();
            for (const auto& c : g.nodes) clusters.push_back({{"id", c.id}, {"members", c.members}});
            levels.push_back({{"level", g.level}, {"span", g.span}, {"clusters", clusters}, {"edges", edges}});
        }
        clip["levels"] = std::move(levels);
        json top = json::array();
        for (const auto& c : r.clusters) top.push_back({{"id", c.id}, {"members", c.members}});
        clip["clusters"] = std::move(top);
        out.push_back(std::move(clip));
    }
    return out.dump(1);
}

}  // namespace tracklabel
