#include "tracklabel/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tracklabel/error.hpp"

namespace tracklabel {

std::string_view to_string(DetectionSource s) {
    switch (s) {
        case DetectionSource::detector: return "detector";
        case DetectionSource::ground_truth: return "ground-truth";
        case DetectionSource::annotator_refined: return "annotator-refined";
        case DetectionSource::interpolated: return "interpolated";
        case DetectionSource::synthetic: return "synthetic";
    }
    return "detector";
}

std::string_view to_string(LabelProvenance p) {
    switch (p) {
        case LabelProvenance::pseudo: return "pseudo";
        case LabelProvenance::human: return "human";
        case LabelProvenance::interpolated: return "interpolated";
        case LabelProvenance::ground_truth: return "ground-truth";
    }
    return "pseudo";
}

DetectionSource detection_source_from_string(std::string_view s) {
    if (s == "detector") return DetectionSource::detector;
    if (s == "ground-truth") return DetectionSource::ground_truth;
    if (s == "annotator-refined") return DetectionSource::annotator_refined;
    if (s == "interpolated") return DetectionSource::interpolated;
    if (s == "synthetic") return DetectionSource::synthetic;
    throw DomainError("unknown detection source '" + std::string(s) + "'");
}

LabelProvenance label_provenance_from_string(std::string_view s) {
    if (s == "pseudo") return LabelProvenance::pseudo;
    if (s == "human") return LabelProvenance::human;
    if (s == "interpolated") return LabelProvenance::interpolated;
    if (s == "ground-truth") return LabelProvenance::ground_truth;
    throw DomainError("unknown label provenance '" + std::string(s) + "'");
}

void LabelSet::normalize() {
    std::sort(entries.begin(), entries.end(), [](const LabelEntry& a, const LabelEntry& b) {
        return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
    });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].frame == entries[i - 1].frame && entries[i].track_id == entries[i - 1].track_id) {
            throw DomainError("duplicate label for frame " + std::to_string(entries[i].frame) + ", track " +
                              std::to_string(entries[i].track_id));
        }
    }
}

std::size_t LabelSet::evaluable_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const LabelEntry& e) { return e.evaluable; }));
}

void validate_detection(const Detection& d) {
    const auto id = std::to_string(d.det_id);
    if (!d.box.valid()) throw DomainError("detection " + id + ": width and height must be positive");
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
        throw DomainError("detection " + id + ": confidence outside [0,1]");
    if (d.has_embedding()) {
        double sq = 0.0;
        for (float v : d.embedding) sq += static_cast<double>(v) * v;
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) throw DomainError("detection " + id + ": embedding not unit norm");
    }
}

void Sequence::validate() const {
    std::unordered_set<DetId> seen;
    seen.reserve(detections.size());
    for (const auto& d : detections) {
        if (d.frame < 1 || d.frame > frame_count)
            throw DomainError("detection " + std::to_string(d.det_id) + ": frame outside [1, frame_count]");
        if (!seen.insert(d.det_id).second) throw DomainError("duplicate det_id " + std::to_string(d.det_id));
        validate_detection(d);
    }
}

const Detection* Sequence::find(DetId id) const {
    // Generated and loaded sequences keep detections sorted by det_id.
    auto it = std::lower_bound(detections.begin(), detections.end(), id,
                               [](const Detection& d, DetId v) { return d.det_id < v; });
    if (it != detections.end() && it->det_id == id) return &*it;
    for (const auto& d : detections)
        if (d.det_id == id) return &d;
    return nullptr;
}

}  // namespace tracklabel
