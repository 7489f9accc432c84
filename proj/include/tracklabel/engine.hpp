#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracklabel/active.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/hierarchy.hpp"
#include "tracklabel/metrics.hpp"
#include "tracklabel/synthgen.hpp"
#include "tracklabel/training.hpp"

namespace tracklabel {

struct PipelineConfig {
    WorldConfig source;
    // Synthetic target: domain_shift(source, shift) with target_seed. An
    // ingested MOT directory (target_dir) takes precedence.
    ShiftParams shift;
    std::uint64_t target_seed = 2;
    std::string target_id = "target";
    std::string target_dir;

    double admission = 0.1;
    HierarchyConfig hierarchy;

    long budget = 0;
    // When >= 0, the budget is round(fraction * full manual cost of the
    // target ground truth) instead of `budget`.
    double budget_fraction = -1.0;
    BudgetPolicy policy = BudgetPolicy::mot17_style;
    std::vector<double> budget_weights;  // custom policy only
    double reserve_fraction = 0.0;       // custom policy only
    Acquisition acquisition = Acquisition::spam;
    std::uint64_t seed = 0;  // acquisition sampling and mini-batch order

    TrainOptions train;
    int selftrain_rounds = 1;

    // Throws ConfigError; requires admission < node_accept_threshold.
    void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
// Missing keys keep their defaults; unknown keys are a ConfigError.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig read_pipeline_config(const std::filesystem::path& path);
// 16 hex digits of FNV-1a over the canonical JSON rendering.
std::string config_hash(const PipelineConfig& cfg);

nlohmann::json to_json(const WorldConfig& cfg);
WorldConfig world_config_from_json(const nlohmann::json& j, WorldConfig base = {});
nlohmann::json to_json(const HierarchyConfig& cfg);
nlohmann::json to_json(const MetricsReport& m);
nlohmann::json to_json(const BudgetLedger& b);

Sequence make_source(const PipelineConfig& cfg);
// The target before admission (with ground truth when available).
Sequence make_target(const PipelineConfig& cfg);
long resolve_budget(const PipelineConfig& cfg, const Sequence& target);
BudgetLedger make_ledger(const PipelineConfig& cfg, const Sequence& target);

enum class Stage { pretrain = 0, selftrain = 1, label = 2, evaluate = 3 };
std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

// Wraps a failure inside a pipeline stage; kind() is the cause's kind.
class StageError : public Error {
public:
    StageError(Stage stage, const Error& cause)
        : Error("stage " + std::string(to_string(stage)) + ": " + cause.what()), stage_(stage), kind_(cause.kind()) {}
    Stage stage() const noexcept { return stage_; }
    const char* kind() const noexcept override { return kind_.c_str(); }

private:
    Stage stage_;
    std::string kind_;
};

struct PipelineOptions {
    // Artifacts and manifest.json are written here when set; stages whose
    // artifacts are recorded in an existing manifest with the same config
    // hash are loaded instead of recomputed.
    std::optional<std::filesystem::path> out_dir;
    Stage stop_after = Stage::evaluate;
};

struct PipelineResult {
    std::string config_hash;
    Stage reached = Stage::pretrain;
    ScorerParams pretrained;
    ScorerParams selftrained;
    LabelSet pseudo_labels;  // self-trained model, no annotation
    LabelSet labels;
    BudgetLedger ledger;
    std::vector<std::string> audit;
    std::optional<MetricsReport> pretrained_metrics;
    std::optional<MetricsReport> selftrained_metrics;
    std::optional<MetricsReport> final_metrics;
    std::vector<std::string> loaded_stages;  // resumed from disk
};

// Pretrain on the source, self-train on the admitted target, label it with
// the annotator (the ground-truth oracle when null) and evaluate against the
// target ground truth when present.
PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineOptions& opts = {},
                            Annotator* annotator = nullptr);

// Labels as they come back from the export format (4-decimal boxes).
LabelSet quantize_labels(const LabelSet& labels);

// Desk-scale benchmark: noisy constant-velocity source, target with extra
// appearance noise, jitter, false positives and dance motion.
PipelineConfig standard_benchmark(int seed_index);
inline constexpr int kBenchmarkSeeds = 5;
// Random-walk world used by the interpolation study.
WorldConfig interp_benchmark();

struct Fig5Row {
    int seed_index = 0;
    std::string acquisition;  // or "oracle"
    double fraction = 0.0;    // requested budget fraction
    long budget = 0;
    long clicks = 0;
    double hota = 0.0;
    double mota = 0.0;
    double idf1 = 0.0;
};

struct Fig5Options {
    std::vector<int> seed_indices = {1, 2, 3, 4, 5};
    std::vector<double> fractions = {0.01, 0.03, 0.05, 0.1, 0.2};
    std::vector<Acquisition> acquisitions = {Acquisition::spam, Acquisition::random, Acquisition::entropy_image,
                                             Acquisition::entropy_box, Acquisition::coreset};
};

// Per seed: pretrain and self-train once, then label with every acquisition
// at every budget fraction, plus an unlimited-budget oracle row.
std::vector<Fig5Row> fig5_study(const Fig5Options& opts = {});

struct InterpRow {
    double keep_ratio = 0.0;
    long kept_frames = 0;
    double hota = 0.0;
    double mota = 0.0;
    double idf1 = 0.0;
};

std::vector<InterpRow> interp_study(const WorldConfig& world, const std::vector<double>& ratios = {1.0, 0.5, 0.2,
                                                                                                   0.1, 0.05});

enum class Component { node_scorer, edge_scorer, embeddings };
std::string_view to_string(Component c);

struct SwapRow {
    Component component;
    double hota_from = 0.0;  // the component from the domain it is swapped out of
    double hota_to = 0.0;    // the component from the other domain
    double delta = 0.0;      // hota_to - hota_from, HOTA points
};

// Components not under study stay target-domain: scorer heads trained on
// target ground truth, target embeddings. Each row swaps one component from
// its target variant to its source variant (reverse: source to target).
// Embeddings model an extractor: the shifted target's appearance noise is
// what the source-trained one produces, while a target-trained one keeps the
// source noise level. Swapping regenerates the target with the other noise
// level; boxes and detections stay identical.
std::vector<SwapRow> component_swap_study(const PipelineConfig& cfg, bool reverse = false);

std::string fig5_table(const std::vector<Fig5Row>& rows);
std::string interp_table(const std::vector<InterpRow>& rows);
std::string swap_table(const std::vector<SwapRow>& rows);

}  // namespace tracklabel
