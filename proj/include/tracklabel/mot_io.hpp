#pragma once

// Readers and writers for the MOT Challenge text format
//   frame,id,bb_left,bb_top,bb_width,bb_height,conf,class,visibility
// plus the seqinfo.ini metadata file, the label provenance sidecar and the
// binary embedding sidecar.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tracklabel/types.hpp"

namespace tracklabel {

enum class MotKind { detections, ground_truth };

struct RejectedRow {
    int line = 0;
    std::string text;
    std::string reason;
};

struct MotFragment {
    std::vector<Detection> detections;  // kind == detections
    LabelSet labels;                    // kind == ground_truth
    std::vector<RejectedRow> rejected;
};

// Detections get det_id = 1-based index among accepted rows, which is the key
// used by the embedding sidecar.
MotFragment parse_mot(std::istream& in, MotKind kind);
MotFragment read_mot_file(const std::filesystem::path& path, MotKind kind);

// Trims trailing zeros from a 4-decimal rendering: 1.5000 -> "1.5", 2 -> "2".
std::string format_fixed4(double v);

// Engine label export: conf, class and visibility fields all 1, rows sorted
// by (frame, track_id), byte-deterministic.
std::string write_labels(const LabelSet& labels);
// Sidecar mapping (frame, track_id) -> provenance, one "frame,track,prov" row each.
std::string write_provenance(const LabelSet& labels);
// Applies a provenance sidecar to labels read back from a label file.
void apply_provenance(LabelSet& labels, std::istream& sidecar);

// Ground truth with the consider flag, class and visibility preserved.
std::string write_ground_truth(const LabelSet& gt);
std::string write_detections(const std::vector<Detection>& dets);

struct SeqInfo {
    std::string name;
    int im_width = 1920;
    int im_height = 1080;
    double frame_rate = 30.0;
    int seq_length = 0;
    std::map<std::string, std::string> extra;
};

SeqInfo parse_seqinfo(std::istream& in);
SeqInfo read_seqinfo(const std::filesystem::path& path);
std::string write_seqinfo(const SeqInfo& info);

// Embedding sidecar: 16-byte header {"EMB1", uint32 dim, uint64 count}, then
// `count` records of {int64 det_id, dim x float32}, all little-endian.
std::string encode_embeddings(const std::vector<Detection>& dets);
std::map<DetId, std::vector<float>> decode_embeddings(const std::string& bytes);

// Loads a MOT-style sequence directory:
//   <dir>/seqinfo.ini, <dir>/det/det.txt, optional <dir>/det/embeddings.bin,
//   optional <dir>/gt/gt.txt
Sequence load_sequence_dir(const std::filesystem::path& dir);
void save_sequence_dir(const Sequence& seq, const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace tracklabel
