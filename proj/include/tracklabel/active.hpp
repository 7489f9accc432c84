#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tracklabel/annotator.hpp"
#include "tracklabel/hierarchy.hpp"
#include "tracklabel/query.hpp"
#include "tracklabel/scorer.hpp"

namespace tracklabel {

// H(p) = -(p ln p + (1-p) ln(1-p)). Throws DomainError outside [0,1].
double entropy(double p);

// Edge levels: max entropy over incident unclamped edges (0 when there are
// none). The node-level variant is entropy(score).
double node_uncertainty(DetId cluster_id, const LevelGraph& graph);
double node_uncertainty(const ScoredNode& node);

enum class BudgetPolicy { mot17_style, dancetrack_style, custom };

std::string_view to_string(BudgetPolicy p);
BudgetPolicy budget_policy_from_string(std::string_view s);

// Click budget split over levels (index 0 is the node level) plus a
// box-refinement reserve.
struct BudgetLedger {
    long total = 0;
    std::vector<long> levels;
    long reserve = 0;
    std::vector<long> spent_levels;
    long spent_reserve = 0;
    long spent_validate = 0;
    long spent_refine = 0;
    long spent_associate = 0;

    long allocation(int bucket) const { return bucket < 0 ? reserve : levels.at(static_cast<std::size_t>(bucket)); }
    long spent(int bucket) const {
        return bucket < 0 ? spent_reserve : spent_levels.at(static_cast<std::size_t>(bucket));
    }
    long remaining(int bucket) const { return allocation(bucket) - spent(bucket); }
    long spent_total() const;
    // Throws DomainError if the bucket cannot cover `cost`.
    void debit(int bucket, QueryKind kind, long cost);

    friend bool operator==(const BudgetLedger&, const BudgetLedger&) = default;
};

// mot17-style: 50/30/20 over the deepest three levels, the three before
// them and the rest; equal within a group with remainders going deepest
// first. dancetrack-style: reserve round(0.3 B) first, then the same split.
// custom: proportional to `weights` (one per level), remainders deepest
// first, reserve round(reserve_fraction * B). Throws DomainError for B < 0.
BudgetLedger allocate_budget(long budget, int levels, BudgetPolicy policy, std::span<const double> weights = {},
                             double reserve_fraction = 0.0);

enum class Acquisition { spam, random, entropy_image, entropy_box, coreset };

std::string_view to_string(Acquisition a);
Acquisition acquisition_from_string(std::string_view s);

// Greedy k-center over points (Euclidean). The seed point is only a
// reference: the first pick is the point farthest from it, each next pick
// the point farthest from the picks so far; ties to the lower index.
std::vector<std::size_t> k_center(const std::vector<std::vector<double>>& points, std::size_t k,
                                  std::size_t seed_point);

// Ordering key for seeded uniform sampling of subjects.
std::uint64_t random_priority(std::uint64_t seed, int level, DetId id);

// Queries (without ids) for the node level: validate-node from the level-0
// bucket and refine-box from the reserve.
std::vector<AnnotationQuery> select_node_queries(std::span<const ScoredNode> nodes, std::span<const Detection> dets,
                                                 const BudgetLedger& ledger, Acquisition acq, std::uint64_t seed);

// Associate queries for one edge level across clips.
std::vector<AnnotationQuery> select_edge_queries(std::span<const LevelGraph* const> graphs, int level,
                                                 const BudgetLedger& ledger, Acquisition acq, std::uint64_t seed);

// Node clamps implied by a validate-node answer. The decision applies to
// every member detection of the subject, so a cluster query clamps all of
// its members for one click.
std::vector<std::pair<DetId, NodeClamp>> validate_effects(const AnnotationQuery& q, bool accept);

struct LabelingOptions {
    HierarchyConfig hierarchy;
    Acquisition acquisition = Acquisition::spam;
    std::uint64_t seed = 0;
};

// Per-level query/response loop over one (admitted) target sequence.
// Every mutation appends to the audit log; constructing a session and
// re-submitting the logged responses and skips reproduces it exactly.
class LabelingSession {
public:
    LabelingSession(Sequence target, ScorerParams params, LabelingOptions opts, BudgetLedger ledger);
    // The detection index points into seq_, so copies are not allowed.
    LabelingSession(const LabelingSession&) = delete;
    LabelingSession& operator=(const LabelingSession&) = delete;
    LabelingSession(LabelingSession&&) = default;
    LabelingSession& operator=(LabelingSession&&) = default;

    // Unanswered queries of the current batch, in issue order.
    std::vector<AnnotationQuery> pending(std::size_t limit = static_cast<std::size_t>(-1)) const;
    // Throws ProtocolError for stale, duplicate or mismatched responses and
    // ConflictError for contradictions; both leave the state unchanged apart
    // from a "rejected" audit record. Returns the clicks debited.
    long submit(const AnnotatorResponse& r);
    // Drops a pending query at zero cost. Throws ProtocolError if unknown.
    void skip(const std::string& query_id);

    bool complete() const { return complete_; }
    int level() const { return level_; }
    // Final labels when complete; otherwise the result of solving the
    // remaining levels with the current clamps and no further queries.
    LabelSet labels() const;

    const BudgetLedger& ledger() const { return ledger_; }
    const ClampSet& clamps() const { return clamps_; }
    const std::vector<std::string>& audit() const { return audit_; }
    const Sequence& sequence() const { return seq_; }
    std::string state_dump() const;

    // Rebuilds a session from its construction arguments and audit lines.
    static LabelingSession replay(Sequence target, ScorerParams params, LabelingOptions opts, BudgetLedger ledger,
                                  std::span<const std::string> audit_lines);

private:
    Sequence seq_;
    ScorerParams params_;
    LabelingOptions opts_;
    BudgetLedger ledger_;
    ClampSet clamps_;
    DetectionIndex index_;
    SolveContext ctx_;
    std::vector<Clip> clips_;
    std::vector<std::vector<std::size_t>> clip_dets_;  // indices into seq_.detections

    int level_ = 0;
    bool complete_ = false;
    std::vector<std::vector<ScoredNode>> nodes_;     // per clip, node level
    std::vector<std::vector<Cluster>> clusters_;     // per clip, input to level_
    std::vector<LevelGraph> graphs_;                 // per clip, current edge level
    std::vector<HierarchyResult> results_;           // per clip, levels solved so far
    std::vector<Cluster> final_clusters_;
    LabelSet final_labels_;

    std::vector<AnnotationQuery> batch_;
    std::map<std::string, std::size_t> open_;  // query_id -> batch index
    std::map<std::string, bool> closed_;       // query_id -> answered
    long serial_ = 0;
    std::vector<std::string> audit_;

    std::vector<Detection> clip_detections(std::size_t clip) const;
    void start_level();
    void finish_level();
    void advance();
    void solve_nodes();
    void build_graphs();
    void log(const nlohmann::json& record);
    const AnnotationQuery& open_query(const std::string& id) const;
};

// Reconstructs the clamp set from an audit log.
ClampSet replay_audit(std::span<const std::string> audit_lines);
// Sum of clicks over response records.
long audit_clicks(std::span<const std::string> audit_lines);

struct LabelingResult {
    LabelSet labels;
    BudgetLedger ledger;
    ClampSet clamps;
    std::vector<std::string> audit;
    long answered = 0;
    long skipped = 0;
    long rejected = 0;
};

LabelingResult run_active_labeling(const Sequence& target, const ScorerParams& params, const LabelingOptions& opts,
                                   const BudgetLedger& ledger, Annotator& annotator);

// Ground-truth labels on ceil(r * F) uniformly spaced frames (first and last
// included), linearly interpolated per track between kept frames, never
// extrapolated. Throws DomainError unless 0 < r <= 1.
LabelSet interpolation_baseline(const Sequence& seq, double keep_ratio);

}  // namespace tracklabel
