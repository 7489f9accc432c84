#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracklabel {

using DetId = std::int64_t;
using TrackId = std::int64_t;

// Axis-aligned box in continuous pixel coordinates, (left, top, width, height).
struct Box {
    double left = 0.0;
    double top = 0.0;
    double width = 0.0;
    double height = 0.0;

    double right() const { return left + width; }
    double bottom() const { return top + height; }
    double center_x() const { return left + 0.5 * width; }
    double center_y() const { return top + 0.5 * height; }
    double area() const { return width * height; }
    bool valid() const { return width > 0.0 && height > 0.0; }

    friend bool operator==(const Box&, const Box&) = default;
};

enum class DetectionSource { detector, ground_truth, annotator_refined, interpolated, synthetic };
enum class LabelProvenance { pseudo, human, interpolated, ground_truth };

std::string_view to_string(DetectionSource s);
std::string_view to_string(LabelProvenance p);
DetectionSource detection_source_from_string(std::string_view s);
LabelProvenance label_provenance_from_string(std::string_view s);

struct Detection {
    DetId det_id = 0;
    int frame = 1;
    Box box;
    double confidence = 1.0;
    // Unit L2 norm when present. Stored as float so the binary sidecar
    // round-trips exactly.
    std::vector<float> embedding;
    DetectionSource source = DetectionSource::detector;

    bool has_embedding() const { return !embedding.empty(); }
};

struct LabelEntry {
    int frame = 1;
    TrackId track_id = 0;
    Box box;
    LabelProvenance provenance = LabelProvenance::pseudo;
    // False for rows the benchmarks exclude from scoring (non-pedestrian
    // classes, zero "consider" flag). Such rows still round-trip.
    bool evaluable = true;
    double visibility = 1.0;
    int object_class = 1;
};

struct LabelSet {
    std::string seq_id;
    std::vector<LabelEntry> entries;

    // Sorts by (frame, track_id). Throws DomainError if a (frame, track_id)
    // pair occurs twice.
    void normalize();
    std::size_t evaluable_count() const;
};

struct Trajectory {
    TrackId track_id = 0;
    std::vector<DetId> members;  // ordered by frame, one per frame
};

struct Sequence {
    std::string seq_id;
    int frame_count = 0;
    double frame_rate = 30.0;
    int image_width = 1920;
    int image_height = 1080;
    std::vector<Detection> detections;
    std::optional<LabelSet> ground_truth;

    // Throws DomainError on invalid frames, duplicate ids, bad boxes,
    // confidences outside [0,1] or non-unit embeddings.
    void validate() const;
    const Detection* find(DetId id) const;
};

// Checks the per-detection invariants; throws DomainError.
void validate_detection(const Detection& d);

}  // namespace tracklabel
