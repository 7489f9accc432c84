#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "tracklabel/error.hpp"
#include "tracklabel/mot_io.hpp"
#include "tracklabel/synthgen.hpp"

using namespace tracklabel;

namespace {

MotFragment parse(const std::string& text, MotKind kind) {
    std::istringstream in(text);
    return parse_mot(in, kind);
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("tracklabel-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(MotParse, DetectionLine) {
    auto f = parse("1,-1,100.0,200.0,50.0,100.0,0.87,1,1\n", MotKind::detections);
    ASSERT_EQ(f.detections.size(), 1u);
    const auto& d = f.detections[0];
    EXPECT_EQ(d.frame, 1);
    EXPECT_EQ(d.det_id, 1);
    EXPECT_EQ(d.box, (Box{100, 200, 50, 100}));
    EXPECT_DOUBLE_EQ(d.confidence, 0.87);
    EXPECT_TRUE(f.rejected.empty());
}

TEST(MotParse, GroundTruthLine) {
    auto f = parse("3,7,10,10,20,40,1,1,1.0\n", MotKind::ground_truth);
    ASSERT_EQ(f.labels.entries.size(), 1u);
    const auto& e = f.labels.entries[0];
    EXPECT_EQ(e.frame, 3);
    EXPECT_EQ(e.track_id, 7);
    EXPECT_EQ(e.box, (Box{10, 10, 20, 40}));
    EXPECT_TRUE(e.evaluable);
}

TEST(MotParse, NegativeWidthIsRejected) {
    auto f = parse("1,-1,100,200,-5,100,0.9,1,1\n", MotKind::detections);
    EXPECT_TRUE(f.detections.empty());
    ASSERT_EQ(f.rejected.size(), 1u);
    EXPECT_EQ(f.rejected[0].line, 1);
}

TEST(MotParse, RejectedRowsKeepLaterIdsDense) {
    auto f = parse("1,-1,0,0,10,10,0.5\n1,-1,0,0,0,10,0.5\n2,-1,5,5,10,10,0.7\n", MotKind::detections);
    ASSERT_EQ(f.detections.size(), 2u);
    EXPECT_EQ(f.detections[1].det_id, 2);
    EXPECT_EQ(f.rejected.size(), 1u);
}

TEST(MotParse, NonPedestrianGroundTruthIsNotEvaluable) {
    auto f = parse("1,1,0,0,10,10,0,1,1\n1,2,20,0,10,10,1,7,1\n1,3,40,0,10,10,1,1,0.5\n", MotKind::ground_truth);
    ASSERT_EQ(f.labels.entries.size(), 3u);
    EXPECT_FALSE(f.labels.entries[0].evaluable);
    EXPECT_FALSE(f.labels.entries[1].evaluable);
    EXPECT_TRUE(f.labels.entries[2].evaluable);
    EXPECT_DOUBLE_EQ(f.labels.entries[2].visibility, 0.5);
}

TEST(MotParse, MalformedLineIsParseErrorWithLine) {
    try {
        parse("1,-1,0,0,10,10,0.5\n1,-1,a,0,1,1,0.5\n", MotKind::detections);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2);
    }
    EXPECT_THROW(parse("1,2,3\n", MotKind::ground_truth), ParseError);
}

TEST(MotParse, CommentsAndBlankLinesSkipped) {
    auto f = parse("# header\n\n1,-1,0,0,10,10,0.5\n", MotKind::detections);
    EXPECT_EQ(f.detections.size(), 1u);
}

TEST(MotWrite, SingleEntry) {
    LabelSet s;
    s.entries.push_back({2, 5, Box{1, 2, 3, 4}});
    EXPECT_EQ(write_labels(s), "2,5,1,2,3,4,1,1,1\n");
}

TEST(MotWrite, EmptySetGivesEmptyFile) { EXPECT_EQ(write_labels(LabelSet{}), ""); }

TEST(MotWrite, RowsSortedByTrackWithinFrame) {
    LabelSet s;
    s.entries.push_back({1, 9, Box{0, 0, 1, 1}});
    s.entries.push_back({1, 3, Box{5, 5, 1, 1}});
    EXPECT_EQ(write_labels(s), "1,3,5,5,1,1,1,1,1\n1,9,0,0,1,1,1,1,1\n");
}

TEST(MotWrite, FixedPrecision) {
    EXPECT_EQ(format_fixed4(1.5), "1.5");
    EXPECT_EQ(format_fixed4(2.0), "2");
    EXPECT_EQ(format_fixed4(0.123456), "0.1235");
    EXPECT_EQ(format_fixed4(-0.00001), "0");
}

TEST(MotWrite, LabelsRoundTripWithProvenance) {
    LabelSet s;
    s.entries.push_back({1, 1, Box{1.25, 2.5, 30, 60}, LabelProvenance::human});
    s.entries.push_back({2, 1, Box{2.25, 2.5, 30, 60}, LabelProvenance::interpolated});
    s.entries.push_back({2, 4, Box{100, 50, 40, 80}, LabelProvenance::pseudo});
    const std::string text = write_labels(s);
    auto back = parse(text, MotKind::ground_truth).labels;
    std::istringstream prov(write_provenance(s));
    apply_provenance(back, prov);
    ASSERT_EQ(back.entries.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.entries[i].box, s.entries[i].box);
        EXPECT_EQ(back.entries[i].provenance, s.entries[i].provenance);
    }
    EXPECT_EQ(write_labels(back), text);
}

TEST(MotWrite, DuplicateFrameTrackIsDomainError) {
    LabelSet s;
    s.entries.push_back({1, 1, Box{0, 0, 1, 1}});
    s.entries.push_back({1, 1, Box{2, 2, 1, 1}});
    EXPECT_THROW(s.normalize(), DomainError);
}

TEST(SeqInfo, RoundTrip) {
    SeqInfo info;
    info.name = "MOT17-02";
    info.im_width = 1280;
    info.im_height = 720;
    info.frame_rate = 25;
    info.seq_length = 600;
    std::istringstream in(write_seqinfo(info));
    const auto back = parse_seqinfo(in);
    EXPECT_EQ(back.name, "MOT17-02");
    EXPECT_EQ(back.im_width, 1280);
    EXPECT_EQ(back.im_height, 720);
    EXPECT_DOUBLE_EQ(back.frame_rate, 25);
    EXPECT_EQ(back.seq_length, 600);
}

TEST(SeqInfo, MalformedLineIsParseError) {
    std::istringstream in("[Sequence]\nname=x\nimWidth\n");
    EXPECT_THROW(parse_seqinfo(in), ParseError);
}

TEST(Embeddings, SidecarRoundTripIsExact) {
    WorldConfig w;
    w.n_frames = 20;
    w.n_objects = 3;
    const auto seq = generate(w);
    const auto bytes = encode_embeddings(seq.detections);
    ASSERT_EQ(bytes.substr(0, 4), "EMB1");
    const auto back = decode_embeddings(bytes);
    ASSERT_EQ(back.size(), seq.detections.size());
    for (const auto& d : seq.detections) EXPECT_EQ(back.at(d.det_id), d.embedding);
}

TEST(Embeddings, TruncatedSidecarIsParseError) {
    WorldConfig w;
    w.n_frames = 5;
    w.n_objects = 2;
    auto bytes = encode_embeddings(generate(w).detections);
    bytes.resize(bytes.size() - 3);
    EXPECT_THROW(decode_embeddings(bytes), ParseError);
}

TEST(SequenceDir, SaveLoadRoundTrip) {
    WorldConfig w;
    w.n_frames = 30;
    w.n_objects = 4;
    w.fp_rate = 0.1;
    w.occlusion_rate = 0.05;
    const auto seq = generate(w);
    const auto dir = scratch_dir("seqdir");
    save_sequence_dir(seq, dir);
    const auto back = load_sequence_dir(dir);
    EXPECT_EQ(back.seq_id, seq.seq_id);
    EXPECT_EQ(back.frame_count, seq.frame_count);
    EXPECT_EQ(write_detections(back.detections), write_detections(seq.detections));
    ASSERT_TRUE(back.ground_truth.has_value());
    EXPECT_EQ(write_ground_truth(*back.ground_truth), write_ground_truth(*seq.ground_truth));
    for (std::size_t i = 0; i < seq.detections.size(); ++i)
        EXPECT_EQ(back.detections[i].embedding, seq.detections[i].embedding);
    std::filesystem::remove_all(dir);
}

TEST(SequenceDir, MissingDetectionsIsError) {
    const auto dir = scratch_dir("nodet");
    SeqInfo info;
    info.name = "x";
    info.seq_length = 3;
    write_text_file(dir / "seqinfo.ini", write_seqinfo(info));
    EXPECT_THROW(load_sequence_dir(dir), Error);
    std::filesystem::remove_all(dir);
}
