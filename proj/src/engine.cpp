#include "tracklabel/engine.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>

#include "tracklabel/error.hpp"
#include "tracklabel/mot_io.hpp"

namespace tracklabel {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Reads `key` into `out` when present.
template <class T>
void take(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
    }
}

json to_json(const ShiftParams& s) {
    return {{"appearance_sigma", s.appearance_sigma},
            {"jitter_sigma", s.jitter_sigma},
            {"fn_rate", s.fn_rate},
            {"fp_rate", s.fp_rate},
            {"occlusion_rate", s.occlusion_rate},
            {"conf_base", s.conf_base},
            {"speed_scale", s.speed_scale},
            {"motion", s.motion ? json(std::string(to_string(*s.motion))) : json(nullptr)}};
}

ShiftParams shift_from_json(const json& j) {
    check_keys(j,
               {"appearance_sigma", "jitter_sigma", "fn_rate", "fp_rate", "occlusion_rate", "conf_base", "speed_scale",
                "motion"},
               "shift");
    ShiftParams s;
    take(j, "appearance_sigma", s.appearance_sigma);
    take(j, "jitter_sigma", s.jitter_sigma);
    take(j, "fn_rate", s.fn_rate);
    take(j, "fp_rate", s.fp_rate);
    take(j, "occlusion_rate", s.occlusion_rate);
    take(j, "conf_base", s.conf_base);
    take(j, "speed_scale", s.speed_scale);
    if (j.contains("motion") && !j.at("motion").is_null()) {
        std::string m;
        take(j, "motion", m);
        s.motion = motion_model_from_string(m);
    }
    return s;
}

HierarchyConfig hierarchy_from_json(const json& j) {
    check_keys(j, {"clip_length", "node_level_window", "edge_level_spans", "k", "node_accept_threshold", "max_interp_gap"},
               "hierarchy");
    HierarchyConfig h;
    take(j, "clip_length", h.clip_length);
    take(j, "node_level_window", h.node_level_window);
    take(j, "edge_level_spans", h.edge_level_spans);
    take(j, "k", h.k);
    take(j, "node_accept_threshold", h.node_accept_threshold);
    take(j, "max_interp_gap", h.max_interp_gap);
    return h;
}

json to_json(const TrainOptions& t) {
    return {{"gamma", t.gamma},         {"lr", t.lr},
            {"weight_decay", t.weight_decay}, {"epochs", t.epochs},
            {"batch_size", t.batch_size}, {"seed", t.seed}};
}

TrainOptions train_from_json(const json& j) {
    check_keys(j, {"gamma", "lr", "weight_decay", "epochs", "batch_size", "seed"}, "train");
    TrainOptions t;
    take(j, "gamma", t.gamma);
    take(j, "lr", t.lr);
    take(j, "weight_decay", t.weight_decay);
    take(j, "epochs", t.epochs);
    take(j, "batch_size", t.batch_size);
    take(j, "seed", t.seed);
    return t;
}

}  // namespace

json to_json(const WorldConfig& cfg) {
    json j = json::object();
    for (const auto& [key, value] : to_key_values(cfg)) {
        if (key == "seq_id" || key == "motion")
            j[key] = value;
        else
            j[key] = json::parse(value);
    }
    return j;
}

WorldConfig world_config_from_json(const json& j, WorldConfig base) {
    if (!j.is_object()) throw ConfigError("world config must be an object");
    std::map<std::string, std::string> kv;
    for (const auto& [key, value] : j.items()) {
        if (value.is_string())
            kv[key] = value.get<std::string>();
        else if (value.is_number())
            kv[key] = value.dump();
        else
            throw ConfigError("world config field '" + key + "' must be a number or string");
    }
    return world_config_from_key_values(kv, base);
}

json to_json(const HierarchyConfig& h) {
    return {{"clip_length", h.clip_length},
            {"node_level_window", h.node_level_window},
            {"edge_level_spans", h.edge_level_spans},
            {"k", h.k},
            {"node_accept_threshold", h.node_accept_threshold},
            {"max_interp_gap", h.max_interp_gap}};
}

json to_json(const MetricsReport& m) {
    return {{"hota", m.hota},
            {"deta", m.deta},
            {"assa", m.assa},
            {"mota", m.mota},
            {"idf1", m.idf1},
            {"tp", m.clear.tp},
            {"fp", m.clear.fp},
            {"fn", m.clear.fn},
            {"idsw", m.clear.idsw},
            {"gt_count", m.clear.gt_count},
            {"idtp", m.identity.idtp},
            {"idfp", m.identity.idfp},
            {"idfn", m.identity.idfn},
            {"clicks", m.clicks},
            {"budget_fraction", m.budget_fraction}};
}

json to_json(const BudgetLedger& b) {
    return {{"total", b.total},
            {"levels", b.levels},
            {"reserve", b.reserve},
            {"spent_levels", b.spent_levels},
            {"spent_reserve", b.spent_reserve},
            {"spent_validate", b.spent_validate},
            {"spent_refine", b.spent_refine},
            {"spent_associate", b.spent_associate},
            {"spent_total", b.spent_total()}};
}

namespace {

BudgetLedger ledger_from_json(const json& j) {
    BudgetLedger b;
    try {
        b.total = j.at("total").get<long>();
        b.levels = j.at("levels").get<std::vector<long>>();
        b.reserve = j.at("reserve").get<long>();
        b.spent_levels = j.at("spent_levels").get<std::vector<long>>();
        b.spent_reserve = j.at("spent_reserve").get<long>();
        b.spent_validate = j.at("spent_validate").get<long>();
        b.spent_refine = j.at("spent_refine").get<long>();
        b.spent_associate = j.at("spent_associate").get<long>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("budget ledger: ") + e.what(), 0);
    }
    return b;
}

}  // namespace

void PipelineConfig::validate() const {
    source.validate();
    hierarchy.validate();
    if (!(admission >= 0.0 && admission < hierarchy.node_accept_threshold))
        throw ConfigError("admission threshold must be in [0, node_accept_threshold)");
    if (budget < 0) throw ConfigError("budget must be >= 0");
    if (!(budget_fraction < 0.0 || std::isfinite(budget_fraction)))
        throw ConfigError("budget_fraction must be finite");
    if (selftrain_rounds < 0) throw ConfigError("selftrain_rounds must be >= 0");
    if (train.epochs < 0 || train.batch_size < 0 || !(train.lr > 0.0))
        throw ConfigError("train needs epochs >= 0, batch_size >= 0 and lr > 0");
    if (policy == BudgetPolicy::custom && budget_weights.size() != static_cast<std::size_t>(hierarchy.level_count()))
        throw ConfigError("custom policy needs one budget weight per level");
    if (target_dir.empty()) domain_shift(source, shift).config.validate();
}

json to_json(const PipelineConfig& c) {
    return {{"source", to_json(c.source)},
            {"shift", to_json(c.shift)},
            {"target_seed", c.target_seed},
            {"target_id", c.target_id},
            {"target_dir", c.target_dir},
            {"admission", c.admission},
            {"hierarchy", to_json(c.hierarchy)},
            {"budget", c.budget},
            {"budget_fraction", c.budget_fraction},
            {"policy", to_string(c.policy)},
            {"budget_weights", c.budget_weights},
            {"reserve_fraction", c.reserve_fraction},
            {"acquisition", to_string(c.acquisition)},
            {"seed", c.seed},
            {"train", to_json(c.train)},
            {"selftrain_rounds", c.selftrain_rounds}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
    check_keys(j,
               {"source", "shift", "target_seed", "target_id", "target_dir", "admission", "hierarchy", "budget",
                "budget_fraction", "policy", "budget_weights", "reserve_fraction", "acquisition", "seed", "train",
                "selftrain_rounds"},
               "pipeline config");
    PipelineConfig c;
    if (j.contains("source")) c.source = world_config_from_json(j.at("source"));
    if (j.contains("shift")) c.shift = shift_from_json(j.at("shift"));
    take(j, "target_seed", c.target_seed);
    take(j, "target_id", c.target_id);
    take(j, "target_dir", c.target_dir);
    take(j, "admission", c.admission);
    if (j.contains("hierarchy")) c.hierarchy = hierarchy_from_json(j.at("hierarchy"));
    take(j, "budget", c.budget);
    take(j, "budget_fraction", c.budget_fraction);
    if (j.contains("policy")) c.policy = budget_policy_from_string(j.at("policy").get<std::string>());
    take(j, "budget_weights", c.budget_weights);
    take(j, "reserve_fraction", c.reserve_fraction);
    if (j.contains("acquisition")) c.acquisition = acquisition_from_string(j.at("acquisition").get<std::string>());
    take(j, "seed", c.seed);
    if (j.contains("train")) c.train = train_from_json(j.at("train"));
    take(j, "selftrain_rounds", c.selftrain_rounds);
    c.validate();
    return c;
}

PipelineConfig read_pipeline_config(const fs::path& path) {
    const std::string text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    return pipeline_config_from_json(j);
}

std::string config_hash(const PipelineConfig& cfg) { return hex16(fnv1a(to_json(cfg).dump())); }

Sequence make_source(const PipelineConfig& cfg) { return generate(cfg.source); }

Sequence make_target(const PipelineConfig& cfg) {
    if (!cfg.target_dir.empty()) return load_sequence_dir(cfg.target_dir);
    WorldConfig w = domain_shift(cfg.source, cfg.shift).config;
    w.seed = cfg.target_seed;
    w.seq_id = cfg.target_id;
    return generate(w);
}

long resolve_budget(const PipelineConfig& cfg, const Sequence& target) {
    if (cfg.budget_fraction < 0.0) return cfg.budget;
    if (!target.ground_truth) throw ConfigError("budget_fraction needs target ground truth");
    return std::lround(cfg.budget_fraction * static_cast<double>(full_manual_cost(*target.ground_truth)));
}

BudgetLedger make_ledger(const PipelineConfig& cfg, const Sequence& target) {
    return allocate_budget(resolve_budget(cfg, target), cfg.hierarchy.level_count(), cfg.policy, cfg.budget_weights,
                           cfg.reserve_fraction);
}

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::pretrain: return "pretrain";
        case Stage::selftrain: return "selftrain";
        case Stage::label: return "label";
        case Stage::evaluate: return "evaluate";
    }
    return "pretrain";
}

Stage stage_from_string(std::string_view s) {
    if (s == "pretrain") return Stage::pretrain;
    if (s == "selftrain") return Stage::selftrain;
    if (s == "label") return Stage::label;
    if (s == "evaluate") return Stage::evaluate;
    throw ConfigError("unknown stage '" + std::string(s) + "'");
}

LabelSet quantize_labels(const LabelSet& labels) {
    std::istringstream text(write_labels(labels));
    auto frag = parse_mot(text, MotKind::ground_truth);
    std::istringstream prov(write_provenance(labels));
    apply_provenance(frag.labels, prov);
    frag.labels.seq_id = labels.seq_id;
    return frag.labels;
}

namespace {

class NullAnnotator : public Annotator {
public:
    std::optional<AnnotatorResponse> answer(const AnnotationQuery&) override { return std::nullopt; }
    std::string name() const override { return "none"; }
};

// manifest.json: config, seeds and the FNV hash of every artifact per
// completed stage.
class Manifest {
public:
    Manifest(std::optional<fs::path> dir, const PipelineConfig& cfg, const std::string& hash) : dir_(std::move(dir)) {
        doc_ = {{"config", to_json(cfg)},
                {"config_hash", hash},
                {"seeds",
                 {{"source", cfg.source.seed},
                  {"target", cfg.target_seed},
                  {"acquisition", cfg.seed},
                  {"train", cfg.train.seed}}},
                {"stages", json::object()}};
        if (!dir_) return;
        const fs::path p = *dir_ / "manifest.json";
        if (!fs::exists(p)) return;
        json old;
        try {
            old = json::parse(read_text_file(p));
        } catch (const json::parse_error&) {
            return;  // unreadable manifest: start over
        }
        if (old.value("config_hash", "") != hash)
            throw ConfigError("output directory holds a run of a different config (" + old.value("config_hash", "?") +
                              ")");
        if (old.contains("stages") && old["stages"].is_object()) doc_["stages"] = old["stages"];
    }

    // Artifact text of a completed stage, when every hash still matches.
    std::optional<std::map<std::string, std::string>> load(Stage s) const {
        if (!dir_) return std::nullopt;
        const auto& stages = doc_["stages"];
        const std::string name(to_string(s));
        if (!stages.contains(name)) return std::nullopt;
        std::map<std::string, std::string> out;
        for (const auto& [file, hash] : stages[name]["artifacts"].items()) {
            const fs::path p = *dir_ / file;
            if (!fs::exists(p)) return std::nullopt;
            std::string text = read_text_file(p);
            if (hex16(fnv1a(text)) != hash.get<std::string>()) return std::nullopt;
            out[file] = std::move(text);
        }
        return out;
    }

    void save(Stage s, const std::map<std::string, std::string>& artifacts) {
        if (!dir_) return;
        fs::create_directories(*dir_);
        json a = json::object();
        for (const auto& [file, text] : artifacts) {
            write_text_file(*dir_ / file, text);
            a[file] = hex16(fnv1a(text));
        }
        doc_["stages"][std::string(to_string(s))] = {{"artifacts", a}};
        const fs::path tmp = *dir_ / "manifest.json.tmp";
        write_text_file(tmp, doc_.dump(2) + "\n");
        fs::rename(tmp, *dir_ / "manifest.json");
    }

private:
    std::optional<fs::path> dir_;
    json doc_;
};

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

ScorerParams params_from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_params(in);
}

LabelSet labels_from_text(const std::string& text, const std::string& prov, const std::string& seq_id) {
    std::istringstream in(text);
    auto frag = parse_mot(in, MotKind::ground_truth);
    std::istringstream p(prov);
    apply_provenance(frag.labels, p);
    frag.labels.seq_id = seq_id;
    return frag.labels;
}

template <class F>
auto in_stage(Stage s, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(s, e);
    }
}

MetricsReport evaluate_params(const Sequence& target, const ScorerParams& params, const HierarchyConfig& h) {
    return evaluate(quantize_labels(solve_sequence(target, params, h, {}).labels), *target.ground_truth);
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineOptions& opts, Annotator* annotator) {
    cfg.validate();
    PipelineResult res;
    res.config_hash = config_hash(cfg);
    Manifest manifest(opts.out_dir, cfg, res.config_hash);

    const Sequence target_raw = in_stage(Stage::selftrain, [&] { return make_target(cfg); });
    const Sequence target = admit(target_raw, cfg.admission);

    // pretrain
    if (auto a = manifest.load(Stage::pretrain)) {
        res.pretrained = params_from_text(a->at("pretrained.params"));
        res.loaded_stages.emplace_back("pretrain");
    } else {
        res.pretrained = in_stage(Stage::pretrain, [&] {
            std::vector<Sequence> sources{make_source(cfg)};
            return pretrain(sources, cfg.hierarchy, cfg.train, cfg.admission).params;
        });
        manifest.save(Stage::pretrain, {{"pretrained.params", write_params(res.pretrained)}});
    }
    res.reached = Stage::pretrain;
    if (opts.stop_after == Stage::pretrain) return res;

    // selftrain
    if (auto a = manifest.load(Stage::selftrain)) {
        res.selftrained = params_from_text(a->at("selftrained.params"));
        res.pseudo_labels = labels_from_text(a->at("pseudo_labels.txt"), a->at("pseudo_labels.prov"), target.seq_id);
        res.loaded_stages.emplace_back("selftrain");
    } else {
        res.selftrained = in_stage(Stage::selftrain, [&] {
            if (cfg.selftrain_rounds == 0) return res.pretrained;
            SelfTrainOptions so;
            so.train = cfg.train;
            so.rounds = cfg.selftrain_rounds;
            so.admission = cfg.admission;
            std::vector<Sequence> targets{target};
            return self_train(res.pretrained, targets, cfg.hierarchy, so).params;
        });
        res.pseudo_labels = in_stage(Stage::selftrain, [&] {
            return quantize_labels(solve_sequence(target, res.selftrained, cfg.hierarchy, {}).labels);
        });
        manifest.save(Stage::selftrain, {{"selftrained.params", write_params(res.selftrained)},
                                         {"pseudo_labels.txt", write_labels(res.pseudo_labels)},
                                         {"pseudo_labels.prov", write_provenance(res.pseudo_labels)}});
    }
    res.reached = Stage::selftrain;
    if (opts.stop_after == Stage::selftrain) return res;

    // label
    if (auto a = manifest.load(Stage::label)) {
        res.labels = labels_from_text(a->at("labels.txt"), a->at("labels.prov"), target.seq_id);
        res.audit = split_lines(a->at("audit.jsonl"));
        res.ledger = ledger_from_json(json::parse(a->at("ledger.json")));
        res.loaded_stages.emplace_back("label");
    } else {
        in_stage(Stage::label, [&] {
            const BudgetLedger ledger = make_ledger(cfg, target_raw);
            std::unique_ptr<Annotator> own;
            if (!annotator) {
                if (target.ground_truth)
                    own = std::make_unique<OracleAnnotator>(target);
                else if (ledger.total == 0)
                    own = std::make_unique<NullAnnotator>();
                else
                    throw DomainError("no annotator given and the target has no ground truth for the oracle");
            }
            LabelingOptions lo;
            lo.hierarchy = cfg.hierarchy;
            lo.acquisition = cfg.acquisition;
            lo.seed = cfg.seed;
            auto r = run_active_labeling(target, res.selftrained, lo, ledger, annotator ? *annotator : *own);
            res.labels = quantize_labels(r.labels);
            res.ledger = r.ledger;
            res.audit = std::move(r.audit);
            return 0;
        });
        manifest.save(Stage::label, {{"labels.txt", write_labels(res.labels)},
                                     {"labels.prov", write_provenance(res.labels)},
                                     {"audit.jsonl", join_lines(res.audit)},
                                     {"ledger.json", to_json(res.ledger).dump(2) + "\n"}});
    }
    res.reached = Stage::label;
    if (opts.stop_after == Stage::label) return res;

    // evaluate
    json metrics = json::object();
    if (target.ground_truth) {
        in_stage(Stage::evaluate, [&] {
            res.pretrained_metrics = evaluate_params(target, res.pretrained, cfg.hierarchy);
            res.selftrained_metrics = evaluate(res.pseudo_labels, *target.ground_truth);
            res.final_metrics = evaluate(res.labels, *target.ground_truth);
            res.final_metrics->clicks = res.ledger.spent_total();
            const long full = full_manual_cost(*target.ground_truth);
            res.final_metrics->budget_fraction =
                full > 0 ? static_cast<double>(res.final_metrics->clicks) / static_cast<double>(full) : 0.0;
            return 0;
        });
        metrics = {{"pretrained", to_json(*res.pretrained_metrics)},
                   {"selftrained", to_json(*res.selftrained_metrics)},
                   {"final", to_json(*res.final_metrics)}};
    }
    if (!manifest.load(Stage::evaluate)) manifest.save(Stage::evaluate, {{"metrics.json", metrics.dump(2) + "\n"}});
    res.reached = Stage::evaluate;
    return res;
}

PipelineConfig standard_benchmark(int seed_index) {
    if (seed_index < 1) throw ConfigError("benchmark seed index starts at 1");
    PipelineConfig c;
    c.source.seq_id = "source";
    c.source.seed = 100 + static_cast<std::uint64_t>(seed_index);
    c.source.occlusion_rate = 0.02;
    c.source.fp_rate = 0.05;
    c.source.jitter_sigma = 1.0;
    c.shift.appearance_sigma = 0.3;
    c.shift.jitter_sigma = 2.0;
    c.shift.fp_rate = 0.05;
    c.shift.conf_base = -0.1;
    c.shift.occlusion_rate = 0.02;
    c.shift.motion = MotionModel::dance;
    c.target_seed = 200 + static_cast<std::uint64_t>(seed_index);
    c.target_id = "target-" + std::to_string(seed_index);
    c.budget_fraction = 0.05;
    c.seed = static_cast<std::uint64_t>(seed_index);
    return c;
}

WorldConfig interp_benchmark() {
    WorldConfig w;
    w.seq_id = "random-walk";
    w.seed = 7;
    w.motion = MotionModel::random_walk;
    return w;
}

std::vector<Fig5Row> fig5_study(const Fig5Options& opts) {
    auto one_seed = [&opts](int s) {
        const PipelineConfig cfg = standard_benchmark(s);
        PipelineOptions po;
        po.stop_after = Stage::selftrain;
        const auto base = run_pipeline(cfg, po);
        const Sequence target = admit(make_target(cfg), cfg.admission);
        const auto& gt = *target.ground_truth;
        const long full = full_manual_cost(gt);
        std::vector<Fig5Row> rows;
        auto run = [&](Acquisition acq, long budget) {
            OracleAnnotator oracle(target);
            LabelingOptions lo;
            lo.hierarchy = cfg.hierarchy;
            lo.acquisition = acq;
            lo.seed = cfg.seed;
            const auto ledger = allocate_budget(budget, cfg.hierarchy.level_count(), cfg.policy);
            auto r = run_active_labeling(target, base.selftrained, lo, ledger, oracle);
            const auto m = evaluate(quantize_labels(r.labels), gt);
            Fig5Row row;
            row.seed_index = s;
            row.budget = budget;
            row.clicks = r.ledger.spent_total();
            row.hota = m.hota;
            row.mota = m.mota;
            row.idf1 = m.idf1;
            return row;
        };
        for (Acquisition acq : opts.acquisitions)
            for (double f : opts.fractions) {
                Fig5Row row = run(acq, std::lround(f * static_cast<double>(full)));
                row.acquisition = std::string(to_string(acq));
                row.fraction = f;
                rows.push_back(row);
            }
        Fig5Row oracle = run(Acquisition::spam, 100 * full);
        oracle.acquisition = "oracle";
        oracle.fraction = static_cast<double>(oracle.clicks) / static_cast<double>(full);
        rows.push_back(oracle);
        return rows;
    };
    std::vector<std::future<std::vector<Fig5Row>>> jobs;
    for (int s : opts.seed_indices) jobs.push_back(std::async(std::launch::async, one_seed, s));
    std::vector<Fig5Row> out;
    for (auto& j : jobs) {
        auto rows = j.get();
        out.insert(out.end(), rows.begin(), rows.end());
    }
    return out;
}

std::vector<InterpRow> interp_study(const WorldConfig& world, const std::vector<double>& ratios) {
    const Sequence seq = generate(world);
    std::vector<InterpRow> out;
    for (double r : ratios) {
        const auto m = evaluate(quantize_labels(interpolation_baseline(seq, r)), *seq.ground_truth);
        InterpRow row;
        row.keep_ratio = r;
        row.kept_frames = std::max(1L, static_cast<long>(std::ceil(r * seq.frame_count - 1e-9)));
        row.hota = m.hota;
        row.mota = m.mota;
        row.idf1 = m.idf1;
        out.push_back(row);
    }
    return out;
}

std::string_view to_string(Component c) {
    switch (c) {
        case Component::node_scorer: return "node-scorer";
        case Component::edge_scorer: return "edge-scorer";
        case Component::embeddings: return "embeddings";
    }
    return "node-scorer";
}

std::vector<SwapRow> component_swap_study(const PipelineConfig& cfg, bool reverse) {
    cfg.validate();
    if (!cfg.target_dir.empty()) throw ConfigError("component swap needs a synthetic target");
    WorldConfig tw = domain_shift(cfg.source, cfg.shift).config;
    tw.seed = cfg.target_seed;
    tw.seq_id = cfg.target_id;
    // The shifted target carries embeddings of the source-trained extractor.
    // An in-domain extractor gives the target source-level appearance noise.
    WorldConfig iw = tw;
    iw.appearance_sigma = cfg.source.appearance_sigma;
    iw.embedding_dim = cfg.source.embedding_dim;

    const Sequence target_src_emb = generate(tw);
    const Sequence target = generate(iw);
    std::vector<Sequence> src{make_source(cfg)};
    std::vector<Sequence> tgt{target};
    const ScorerParams p_src = pretrain(src, cfg.hierarchy, cfg.train, cfg.admission).params;
    const ScorerParams p_tgt = pretrain(tgt, cfg.hierarchy, cfg.train, cfg.admission).params;

    auto score = [&](bool node_src, bool edge_src, bool emb_src) {
        ScorerParams p = p_tgt;
        p.node_weights = (node_src ? p_src : p_tgt).node_weights;
        p.edge_weights = (edge_src ? p_src : p_tgt).edge_weights;
        const Sequence& seq = emb_src ? target_src_emb : target;
        return 100.0 * evaluate_params(admit(seq, cfg.admission), p, cfg.hierarchy).hota;
    };
    const double all_target = score(false, false, false);
    std::vector<SwapRow> out;
    for (Component c : {Component::node_scorer, Component::edge_scorer, Component::embeddings}) {
        const double swapped = score(c == Component::node_scorer, c == Component::edge_scorer, c == Component::embeddings);
        SwapRow row;
        row.component = c;
        row.hota_from = reverse ? swapped : all_target;
        row.hota_to = reverse ? all_target : swapped;
        row.delta = row.hota_to - row.hota_from;
        out.push_back(row);
    }
    return out;
}

std::string fig5_table(const std::vector<Fig5Row>& rows) {
    std::string out = "seed  acquisition     fraction  budget  clicks  HOTA     MOTA     IDF1\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-5d %-15s %8.4f %7ld %7ld  %.4f   %.4f   %.4f\n", r.seed_index,
                      r.acquisition.c_str(), r.fraction, r.budget, r.clicks, r.hota, r.mota, r.idf1);
        out += buf;
    }
    return out;
}

std::string interp_table(const std::vector<InterpRow>& rows) {
    std::string out = "keep_ratio  kept_frames  HOTA     MOTA     IDF1\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-11.2f %-12ld %.4f   %.4f   %.4f\n", r.keep_ratio, r.kept_frames, r.hota,
                      r.mota, r.idf1);
        out += buf;
    }
    return out;
}

std::string swap_table(const std::vector<SwapRow>& rows) {
    std::string out = "component     HOTA_from  HOTA_to   delta\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-13s %9.2f  %7.2f  %+6.2f\n", std::string(to_string(r.component)).c_str(),
                      r.hota_from, r.hota_to, r.delta);
        out += buf;
    }
    return out;
}

}  // namespace tracklabel
