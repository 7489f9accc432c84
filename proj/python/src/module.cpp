#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tracklabel/active.hpp"
#include "tracklabel/annotator.hpp"
#include "tracklabel/engine.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/metrics.hpp"
#include "tracklabel/mot_io.hpp"

namespace py = pybind11;
using namespace tracklabel;
using nlohmann::json;

namespace {

LabelSet labels_from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_mot(in, MotKind::ground_truth).labels;
}

std::string metrics_json(const MetricsReport& m) { return to_json(m).dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "tracklabel engine bindings; structured values cross as JSON text";

    py::register_exception<Error>(m, "TracklabelError", PyExc_RuntimeError);

    m.def("entropy", &entropy, py::arg("p"));
    m.def(
        "allocate_budget",
        [](long budget, int levels, const std::string& policy) {
            return to_json(allocate_budget(budget, levels, budget_policy_from_string(policy))).dump();
        },
        py::arg("budget"), py::arg("levels"), py::arg("policy") = "mot17-style");
    m.def(
        "full_manual_cost", [](const std::string& gt_text) { return full_manual_cost(labels_from_text(gt_text)); },
        py::arg("gt_text"));
    m.def(
        "evaluate",
        [](const std::string& pred_text, const std::string& gt_text) {
            return metrics_json(evaluate(labels_from_text(pred_text), labels_from_text(gt_text)));
        },
        py::arg("pred_text"), py::arg("gt_text"));
    m.def("standard_benchmark", [](int i) { return to_json(standard_benchmark(i)).dump(); }, py::arg("seed_index"));
    m.def("interp_benchmark", [] { return to_json(interp_benchmark()).dump(); });

    py::class_<Sequence>(m, "Sequence")
        .def_readonly("seq_id", &Sequence::seq_id)
        .def_readonly("frame_count", &Sequence::frame_count)
        .def_property_readonly("detection_count", [](const Sequence& s) { return s.detections.size(); })
        .def("ground_truth_text",
             [](const Sequence& s) { return s.ground_truth ? write_ground_truth(*s.ground_truth) : std::string(); })
        .def("detections_text", [](const Sequence& s) { return write_detections(s.detections); });

    m.def(
        "generate",
        [](const std::string& world_json) { return generate(world_config_from_json(json::parse(world_json))); },
        py::arg("world_json"));
    // The admitted target a pipeline labels; what the in-process oracle sees.
    m.def(
        "pipeline_target",
        [](const std::string& config_json) {
            const auto cfg = pipeline_config_from_json(json::parse(config_json));
            return admit(make_target(cfg), cfg.admission);
        },
        py::arg("config_json"));

    py::class_<OracleAnnotator>(m, "OracleAnnotator")
        .def(py::init<const Sequence&, double>(), py::arg("sequence"), py::arg("iou_threshold") = 0.5)
        .def(
            "answer",
            [](OracleAnnotator& o, const std::string& query_json) {
                auto r = o.answer(query_from_json(json::parse(query_json)));
                return r ? to_json(*r).dump() : std::string("null");
            },
            py::arg("query_json"));

    m.def(
        "run_pipeline",
        [](const std::string& config_json, const std::string& out_dir, const std::string& stop_after) {
            PipelineOptions po;
            if (!out_dir.empty()) po.out_dir = out_dir;
            po.stop_after = stage_from_string(stop_after);
            PipelineResult r;
            {
                py::gil_scoped_release release;
                r = run_pipeline(pipeline_config_from_json(json::parse(config_json)), po);
            }
            json j = {{"config_hash", r.config_hash},
                      {"reached", to_string(r.reached)},
                      {"clicks", r.ledger.spent_total()},
                      {"labels", write_labels(r.labels)},
                      {"pseudo_labels", write_labels(r.pseudo_labels)}};
            if (r.pretrained_metrics) j["pretrained"] = to_json(*r.pretrained_metrics);
            if (r.selftrained_metrics) j["selftrained"] = to_json(*r.selftrained_metrics);
            if (r.final_metrics) j["final"] = to_json(*r.final_metrics);
            return j.dump();
        },
        py::arg("config_json"), py::arg("out_dir") = "", py::arg("stop_after") = "evaluate");

    m.def(
        "interp_study",
        [](const std::string& world_json, const std::vector<double>& ratios) {
            json out = json::array();
            for (const auto& r : interp_study(world_config_from_json(json::parse(world_json)), ratios))
                out.push_back({{"keep_ratio", r.keep_ratio}, {"kept_frames", r.kept_frames}, {"hota", r.hota}});
            return out.dump();
        },
        py::arg("world_json"), py::arg("ratios"));
}
