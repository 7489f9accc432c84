// tracklabel command line: synthgen, pretrain, selftrain, label, evaluate,
// study and serve. Every run leaves a manifest.json in its output directory;
// failures print one JSON error record on stderr and exit nonzero.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tracklabel/engine.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/metrics.hpp"
#include "tracklabel/mot_io.hpp"
#include "tracklabel/service.hpp"

using namespace tracklabel;
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

// manifest.json for commands that do not run the pipeline.
void write_run_manifest(const fs::path& dir, const std::string& command, const json& config, const json& seeds,
                        const std::map<std::string, std::string>& artifacts) {
    fs::create_directories(dir);
    json a = json::object();
    for (const auto& [file, text] : artifacts) {
        write_text_file(dir / file, text);
        a[file] = hex16(fnv1a(text));
    }
    json m = {{"command", command},
              {"config", config},
              {"config_hash", hex16(fnv1a(config.dump()))},
              {"seeds", seeds},
              {"artifacts", a}};
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

struct PipelineFlags {
    std::string config_path;
    int benchmark = 0;
    std::string out = "out";
    std::optional<long> budget;
    std::optional<double> budget_fraction;
    std::string policy;
    std::string acquisition;
    std::optional<std::uint64_t> seed;
};

void add_pipeline_flags(CLI::App* app, PipelineFlags& f) {
    app->add_option("-c,--config", f.config_path, "pipeline config (JSON)");
    app->add_option("--benchmark", f.benchmark, "use the standard benchmark with this seed index (1-5)");
    app->add_option("-o,--out", f.out, "output directory")->capture_default_str();
}

void add_label_flags(CLI::App* app, PipelineFlags& f) {
    app->add_option("--budget", f.budget, "click budget B");
    app->add_option("--budget-fraction", f.budget_fraction, "budget as a fraction of the full manual cost");
    app->add_option("--policy", f.policy, "mot17-style | dancetrack-style | custom");
    app->add_option("--acquisition", f.acquisition, "spam | random | entropy-image | entropy-box | coreset");
    app->add_option("--seed", f.seed, "acquisition seed");
}

PipelineConfig load_config(const PipelineFlags& f) {
    PipelineConfig cfg;
    if (!f.config_path.empty() && f.benchmark > 0) throw ConfigError("--config and --benchmark are exclusive");
    if (!f.config_path.empty())
        cfg = read_pipeline_config(f.config_path);
    else if (f.benchmark > 0)
        cfg = standard_benchmark(f.benchmark);
    if (f.budget) {
        cfg.budget = *f.budget;
        cfg.budget_fraction = -1.0;
    }
    if (f.budget_fraction) cfg.budget_fraction = *f.budget_fraction;
    if (!f.policy.empty()) cfg.policy = budget_policy_from_string(f.policy);
    if (!f.acquisition.empty()) cfg.acquisition = acquisition_from_string(f.acquisition);
    if (f.seed) cfg.seed = *f.seed;
    cfg.validate();
    return cfg;
}

void print_metrics(const char* name, const std::optional<MetricsReport>& m) {
    if (m) std::printf("%-12s %s\n", name, m->to_text().c_str());
}

LabelSet read_label_file(const fs::path& path) {
    auto frag = read_mot_file(path, MotKind::ground_truth);
    fs::path prov = path;
    prov.replace_extension(".prov");
    if (fs::exists(prov)) {
        std::istringstream in(read_text_file(prov));
        apply_provenance(frag.labels, in);
    }
    frag.labels.seq_id = path.stem().string();
    return frag.labels;
}

AnnotationService* g_service = nullptr;

extern "C" void on_signal(int) {
    if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tracklabel: multi-object tracking label engine"};
    app.require_subcommand(1);

    // synthgen
    auto* synth = app.add_subcommand("synthgen", "generate a synthetic sequence directory");
    std::string world_path, synth_out = "out/synth", which;
    std::vector<std::string> sets;
    PipelineFlags synth_pf;
    synth->add_option("-w,--world", world_path, "world config (key = value lines)");
    synth->add_option("--set", sets, "override a world config key (key=value), repeatable");
    synth->add_option("-c,--config", synth_pf.config_path, "take the world from a pipeline config");
    synth->add_option("--benchmark", synth_pf.benchmark, "take the world from the standard benchmark");
    synth->add_option("--which", which, "source | target (with --config/--benchmark)")->default_val("target");
    synth->add_option("-o,--out", synth_out, "output directory")->capture_default_str();

    PipelineFlags pre_f, self_f, label_f;
    auto* pre = app.add_subcommand("pretrain", "train the scorer on the synthetic source");
    add_pipeline_flags(pre, pre_f);
    auto* self = app.add_subcommand("selftrain", "pretrain, then self-train on target pseudo-labels");
    add_pipeline_flags(self, self_f);
    auto* label = app.add_subcommand("label", "run the full pipeline with active labeling");
    add_pipeline_flags(label, label_f);
    add_label_flags(label, label_f);
    std::string annotator = "oracle", host = "127.0.0.1";
    int port = 8080;
    long timeout_ms = 0;
    label->add_option("--annotator", annotator, "oracle | remote")->check(CLI::IsMember({"oracle", "remote"}));
    label->add_option("--host", host, "remote annotator: bind address");
    label->add_option("--port", port, "remote annotator: port");
    label->add_option("--timeout-ms", timeout_ms, "remote annotator: skip queries unanswered for this long");

    auto* eval = app.add_subcommand("evaluate", "score a label file against ground truth");
    std::string gt_path, labels_path, eval_out = "out/evaluate";
    eval->add_option("--gt", gt_path, "ground truth (MOT format)")->required();
    eval->add_option("--labels", labels_path, "labels (MOT format)")->required();
    eval->add_option("-o,--out", eval_out, "output directory")->capture_default_str();

    auto* study = app.add_subcommand("study", "desk-scale experiments");
    std::string study_kind, study_out;
    std::vector<int> seeds;
    std::vector<double> fractions, ratios;
    PipelineFlags swap_f;
    bool reverse = false;
    study->add_option("kind", study_kind, "fig5 | interp | swap")->required()->check(
        CLI::IsMember({"fig5", "interp", "swap"}));
    study->add_option("-o,--out", study_out, "output directory (default out/<kind>)");
    study->add_option("--seeds", seeds, "fig5: benchmark seed indices");
    study->add_option("--fractions", fractions, "fig5: budget fractions");
    study->add_option("--ratios", ratios, "interp: keep ratios");
    study->add_option("-w,--world", world_path, "interp: world config");
    study->add_option("-c,--config", swap_f.config_path, "swap: pipeline config");
    study->add_option("--benchmark", swap_f.benchmark, "swap: standard benchmark seed index");
    study->add_flag("--reverse", reverse, "swap: source-to-target direction");

    auto* serve = app.add_subcommand("serve", "run the annotation session service");
    std::string data_root = "data";
    serve->add_option("--host", host, "bind address")->capture_default_str();
    serve->add_option("--port", port, "port")->capture_default_str();
    serve->add_option("--data-root", data_root, "data root (TRACKLABEL_DATA_ROOT overrides)")->capture_default_str();
    serve->add_option("--timeout-ms", timeout_ms, "skip queries unanswered for this long (0 = never)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }

    try {
        if (synth->parsed()) {
            WorldConfig w;
            json seeds_j;
            if (!synth_pf.config_path.empty() || synth_pf.benchmark > 0) {
                const PipelineConfig cfg = load_config(synth_pf);
                if (which == "source") {
                    w = cfg.source;
                } else if (which == "target") {
                    if (!cfg.target_dir.empty()) throw ConfigError("target is an ingested directory");
                    w = domain_shift(cfg.source, cfg.shift).config;
                    w.seed = cfg.target_seed;
                    w.seq_id = cfg.target_id;
                } else {
                    throw ConfigError("--which must be source or target");
                }
            } else if (!world_path.empty()) {
                std::istringstream in(read_text_file(world_path));
                w = parse_world_config(in);
            }
            std::map<std::string, std::string> kv;
            for (const auto& s : sets) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
                kv[s.substr(0, eq)] = s.substr(eq + 1);
            }
            w = world_config_from_key_values(kv, w);
            const Sequence seq = generate(w);
            save_sequence_dir(seq, synth_out);
            write_run_manifest(synth_out, "synthgen", to_json(w), {{"world", w.seed}},
                               {{"world.cfg", write_world_config(w)}});
            std::printf("%s: %zu detections, %zu ground-truth boxes -> %s\n", seq.seq_id.c_str(),
                        seq.detections.size(), seq.ground_truth ? seq.ground_truth->entries.size() : 0,
                        synth_out.c_str());
            return 0;
        }

        if (pre->parsed() || self->parsed()) {
            const PipelineFlags& f = pre->parsed() ? pre_f : self_f;
            PipelineOptions po;
            po.out_dir = f.out;
            po.stop_after = pre->parsed() ? Stage::pretrain : Stage::selftrain;
            const auto cfg = load_config(f);
            const auto r = run_pipeline(cfg, po);
            std::printf("config %s: %s -> %s\n", r.config_hash.c_str(), std::string(to_string(r.reached)).c_str(),
                        f.out.c_str());
            return 0;
        }

        if (label->parsed()) {
            const auto cfg = load_config(label_f);
            if (annotator == "oracle") {
                PipelineOptions po;
                po.out_dir = label_f.out;
                const auto r = run_pipeline(cfg, po);
                std::printf("config %s: %ld clicks -> %s\n", r.config_hash.c_str(), r.ledger.spent_total(),
                            label_f.out.c_str());
                print_metrics("pretrained", r.pretrained_metrics);
                print_metrics("selftrained", r.selftrained_metrics);
                print_metrics("final", r.final_metrics);
                return 0;
            }
            // remote: host one session and wait for the annotator to finish it
            ServiceOptions so;
            so.data_root = fs::path(label_f.out) / "service";
            so.query_timeout = std::chrono::milliseconds(timeout_ms);
            AnnotationService svc(so);
            json created = svc.create_session({{"config", to_json(cfg)}, {"session_id", "label"}});
            g_service = &svc;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::thread server([&] { svc.serve(host, port); });
            std::printf("session label at http://%s:%d/sessions/label\n", host.c_str(), port);
            std::fflush(stdout);
            const bool done = svc.wait_complete("label", std::chrono::hours(24 * 365));
            svc.stop();
            server.join();
            if (!done) throw ProtocolError("session interrupted before completion; rerun to resume");
            const json l = svc.labels("label");
            write_run_manifest(label_f.out, "label", to_json(cfg), {{"acquisition", cfg.seed}},
                               {{"labels.txt", l.at("mot").get<std::string>()},
                                {"labels.prov", l.at("provenance").get<std::string>()}});
            return 0;
        }

        if (eval->parsed()) {
            const LabelSet gt = read_label_file(gt_path);
            const LabelSet pred = read_label_file(labels_path);
            const auto m = evaluate(pred, gt);
            std::printf("%s\n", m.to_text().c_str());
            write_run_manifest(eval_out, "evaluate",
                               {{"gt", gt_path},
                                {"labels", labels_path},
                                {"gt_hash", hex16(fnv1a(read_text_file(gt_path)))},
                                {"labels_hash", hex16(fnv1a(read_text_file(labels_path)))}},
                               json::object(), {{"metrics.json", to_json(m).dump(2) + "\n"}});
            return 0;
        }

        if (study->parsed()) {
            const fs::path out = study_out.empty() ? fs::path("out") / study_kind : fs::path(study_out);
            if (study_kind == "fig5") {
                Fig5Options o;
                if (!seeds.empty()) o.seed_indices = seeds;
                if (!fractions.empty()) o.fractions = fractions;
                const auto rows = fig5_study(o);
                const std::string table = fig5_table(rows);
                std::printf("%s", table.c_str());
                json j = json::array();
                for (const auto& r : rows)
                    j.push_back({{"seed_index", r.seed_index},
                                 {"acquisition", r.acquisition},
                                 {"fraction", r.fraction},
                                 {"budget", r.budget},
                                 {"clicks", r.clicks},
                                 {"hota", r.hota},
                                 {"mota", r.mota},
                                 {"idf1", r.idf1}});
                json seeds_j = json::array();
                for (int s : o.seed_indices) seeds_j.push_back(to_json(standard_benchmark(s)));
                write_run_manifest(out, "study fig5", {{"seed_indices", o.seed_indices}, {"fractions", o.fractions}},
                                   {{"benchmarks", seeds_j}},
                                   {{"fig5.txt", table}, {"fig5.json", j.dump(2) + "\n"}});
            } else if (study_kind == "interp") {
                WorldConfig w = interp_benchmark();
                if (!world_path.empty()) {
                    std::istringstream in(read_text_file(world_path));
                    w = parse_world_config(in);
                }
                const auto rows = ratios.empty() ? interp_study(w) : interp_study(w, ratios);
                const std::string table = interp_table(rows);
                std::printf("%s", table.c_str());
                json j = json::array();
                for (const auto& r : rows)
                    j.push_back({{"keep_ratio", r.keep_ratio},
                                 {"kept_frames", r.kept_frames},
                                 {"hota", r.hota},
                                 {"mota", r.mota},
                                 {"idf1", r.idf1}});
                write_run_manifest(out, "study interp", to_json(w), {{"world", w.seed}},
                                   {{"interp.txt", table}, {"interp.json", j.dump(2) + "\n"}});
            } else {
                if (swap_f.config_path.empty() && swap_f.benchmark == 0) swap_f.benchmark = 1;
                const auto cfg = load_config(swap_f);
                const auto rows = component_swap_study(cfg, reverse);
                const std::string table = swap_table(rows);
                std::printf("%s", table.c_str());
                json j = json::array();
                for (const auto& r : rows)
                    j.push_back({{"component", to_string(r.component)},
                                 {"hota_from", r.hota_from},
                                 {"hota_to", r.hota_to},
                                 {"delta", r.delta}});
                write_run_manifest(out, "study swap", to_json(cfg),
                                   {{"source", cfg.source.seed}, {"target", cfg.target_seed}},
                                   {{"swap.txt", table}, {"swap.json", j.dump(2) + "\n"}});
            }
            return 0;
        }

        if (serve->parsed()) {
            ServiceOptions so;
            so.data_root = resolve_data_root(data_root);
            so.query_timeout = std::chrono::milliseconds(timeout_ms);
            AnnotationService svc(so);
            g_service = &svc;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::printf("serving %s on http://%s:%d\n", so.data_root.string().c_str(), host.c_str(), port);
            std::fflush(stdout);
            if (!svc.serve(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
            return 0;
        }
    } catch (const StageError& e) {
        std::cerr << json{{"error", e.kind()}, {"stage", to_string(e.stage())}, {"message", e.what()}}.dump() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
        return std::string(e.kind()) == "config" || std::string(e.kind()) == "parse" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
