#include "tracklabel/mot_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tracklabel/error.hpp"

namespace tracklabel {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

// MOT files sometimes store integer fields as "1.0".
bool parse_int(std::string_view s, long long& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size()) return true;
    double d = 0.0;
    if (!parse_double(s, d) || d != static_cast<double>(static_cast<long long>(d))) return false;
    out = static_cast<long long>(d);
    return true;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint32_t get_u32(const std::string& s, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
    return v;
}
std::uint64_t get_u64(const std::string& s, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
    return v;
}

}  // namespace

MotFragment parse_mot(std::istream& in, MotKind kind) {
    MotFragment frag;
    std::string line;
    int line_no = 0;
    DetId next_id = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto fields = split(text, ',');
        if (fields.size() < 7) throw ParseError("expected at least 7 comma-separated fields", line_no);

        long long frame = 0, id = 0;
        double left = 0, top = 0, width = 0, height = 0, conf = 0;
        if (!parse_int(fields[0], frame)) throw ParseError("bad frame field '" + std::string(fields[0]) + "'", line_no);
        if (!parse_int(fields[1], id)) throw ParseError("bad id field '" + std::string(fields[1]) + "'", line_no);
        if (!parse_double(fields[2], left) || !parse_double(fields[3], top) || !parse_double(fields[4], width) ||
            !parse_double(fields[5], height))
            throw ParseError("bad box field", line_no);
        if (!parse_double(fields[6], conf)) throw ParseError("bad conf field '" + std::string(fields[6]) + "'", line_no);
        long long cls = 1;
        double visibility = 1.0;
        if (fields.size() > 7 && !parse_int(fields[7], cls)) throw ParseError("bad class field", line_no);
        if (fields.size() > 8 && !parse_double(fields[8], visibility))
            throw ParseError("bad visibility field", line_no);
        if (frame < 1) throw ParseError("frame must be >= 1", line_no);

        if (!(width > 0.0) || !(height > 0.0)) {
            frag.rejected.push_back({line_no, std::string(text), "non-positive width or height"});
            continue;
        }
        const Box box{left, top, width, height};
        if (kind == MotKind::detections) {
            if (!(conf >= 0.0 && conf <= 1.0)) {
                frag.rejected.push_back({line_no, std::string(text), "confidence outside [0,1]"});
                continue;
            }
            Detection d;
            d.det_id = next_id++;
            d.frame = static_cast<int>(frame);
            d.box = box;
            d.confidence = conf;
            d.source = DetectionSource::detector;
            frag.detections.push_back(std::move(d));
        } else {
            LabelEntry e;
            e.frame = static_cast<int>(frame);
            e.track_id = id;
            e.box = box;
            e.provenance = LabelProvenance::ground_truth;
            e.object_class = static_cast<int>(cls);
            e.visibility = visibility;
            // Pedestrian-only evaluation; a zero consider flag also excludes the row.
            e.evaluable = cls == 1 && conf != 0.0;
            frag.labels.entries.push_back(e);
        }
    }
    if (kind == MotKind::ground_truth) frag.labels.normalize();
    return frag;
}

MotFragment read_mot_file(const std::filesystem::path& path, MotKind kind) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open " + path.string());
    auto frag = parse_mot(in, kind);
    frag.labels.seq_id = path.parent_path().parent_path().filename().string();
    return frag;
}

std::string format_fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

namespace {

std::vector<const LabelEntry*> sorted_entries(const LabelSet& labels) {
    std::vector<const LabelEntry*> rows;
    rows.reserve(labels.entries.size());
    for (const auto& e : labels.entries) rows.push_back(&e);
    std::stable_sort(rows.begin(), rows.end(), [](const LabelEntry* a, const LabelEntry* b) {
        return a->frame != b->frame ? a->frame < b->frame : a->track_id < b->track_id;
    });
    return rows;
}

void append_box(std::string& out, const Box& b) {
    out += format_fixed4(b.left);
    out += ',';
    out += format_fixed4(b.top);
    out += ',';
    out += format_fixed4(b.width);
    out += ',';
    out += format_fixed4(b.height);
}

}  // namespace

std::string write_labels(const LabelSet& labels) {
    std::string out;
    for (const auto* e : sorted_entries(labels)) {
        out += std::to_string(e->frame);
        out += ',';
        out += std::to_string(e->track_id);
        out += ',';
        append_box(out, e->box);
        out += ",1,1,1\n";
    }
    return out;
}

std::string write_provenance(const LabelSet& labels) {
    std::string out;
    for (const auto* e : sorted_entries(labels)) {
        out += std::to_string(e->frame);
        out += ',';
        out += std::to_string(e->track_id);
        out += ',';
        out += to_string(e->provenance);
        out += '\n';
    }
    return out;
}

void apply_provenance(LabelSet& labels, std::istream& sidecar) {
    std::map<std::pair<int, TrackId>, LabelProvenance> prov;
    std::string line;
    int line_no = 0;
    while (std::getline(sidecar, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;
        const auto f = split(text, ',');
        long long frame = 0, track = 0;
        if (f.size() != 3 || !parse_int(f[0], frame) || !parse_int(f[1], track))
            throw ParseError("malformed provenance row", line_no);
        prov[{static_cast<int>(frame), track}] = label_provenance_from_string(f[2]);
    }
    for (auto& e : labels.entries) {
        if (auto it = prov.find({e.frame, e.track_id}); it != prov.end()) e.provenance = it->second;
    }
}

std::string write_ground_truth(const LabelSet& gt) {
    std::string out;
    for (const auto* e : sorted_entries(gt)) {
        const bool consider = e->evaluable || e->object_class != 1;
        out += std::to_string(e->frame);
        out += ',';
        out += std::to_string(e->track_id);
        out += ',';
        append_box(out, e->box);
        out += consider ? ",1," : ",0,";
        out += std::to_string(e->object_class);
        out += ',';
        out += format_fixed4(e->visibility);
        out += '\n';
    }
    return out;
}

std::string write_detections(const std::vector<Detection>& dets) {
    std::vector<const Detection*> rows;
    for (const auto& d : dets) rows.push_back(&d);
    std::stable_sort(rows.begin(), rows.end(), [](const Detection* a, const Detection* b) {
        return a->frame != b->frame ? a->frame < b->frame : a->det_id < b->det_id;
    });
    std::string out;
    for (const auto* d : rows) {
        out += std::to_string(d->frame);
        out += ",-1,";
        append_box(out, d->box);
        out += ',';
        out += format_fixed4(d->confidence);
        out += ",1,1\n";
    }
    return out;
}

SeqInfo parse_seqinfo(std::istream& in) {
    SeqInfo info;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '[' || text.front() == '#' || text.front() == ';') continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
        const std::string key(trim(text.substr(0, eq)));
        const std::string value(trim(text.substr(eq + 1)));
        long long iv = 0;
        double dv = 0.0;
        if (key == "name") {
            info.name = value;
        } else if (key == "imWidth") {
            if (!parse_int(value, iv)) throw ParseError("bad imWidth", line_no);
            info.im_width = static_cast<int>(iv);
        } else if (key == "imHeight") {
            if (!parse_int(value, iv)) throw ParseError("bad imHeight", line_no);
            info.im_height = static_cast<int>(iv);
        } else if (key == "frameRate") {
            if (!parse_double(value, dv)) throw ParseError("bad frameRate", line_no);
            info.frame_rate = dv;
        } else if (key == "seqLength") {
            if (!parse_int(value, iv)) throw ParseError("bad seqLength", line_no);
            info.seq_length = static_cast<int>(iv);
        } else {
            info.extra[key] = value;
        }
    }
    return info;
}

SeqInfo read_seqinfo(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open " + path.string());
    return parse_seqinfo(in);
}

std::string write_seqinfo(const SeqInfo& info) {
    std::ostringstream out;
    out << "[Sequence]\n";
    out << "name=" << info.name << "\n";
    out << "imDir=img1\n";
    out << "frameRate=" << format_fixed4(info.frame_rate) << "\n";
    out << "seqLength=" << info.seq_length << "\n";
    out << "imWidth=" << info.im_width << "\n";
    out << "imHeight=" << info.im_height << "\n";
    out << "imExt=.jpg\n";
    for (const auto& [k, v] : info.extra) {
        if (k == "imDir" || k == "imExt") continue;
        out << k << "=" << v << "\n";
    }
    return out.str();
}

std::string encode_embeddings(const std::vector<Detection>& dets) {
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    for (const auto& d : dets) {
        if (!d.has_embedding()) continue;
        if (dim == 0) dim = static_cast<std::uint32_t>(d.embedding.size());
        if (d.embedding.size() != dim) throw DomainError("embeddings of mixed dimension");
        ++count;
    }
    std::string out;
    out.reserve(16 + count * (8 + 4 * dim));
    out += "EMB1";
    put_u32(out, dim);
    put_u64(out, count);
    for (const auto& d : dets) {
        if (!d.has_embedding()) continue;
        put_u64(out, static_cast<std::uint64_t>(d.det_id));
        for (float v : d.embedding) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

std::map<DetId, std::vector<float>> decode_embeddings(const std::string& bytes) {
    if (bytes.size() < 16 || bytes.compare(0, 4, "EMB1") != 0) throw ParseError("embedding sidecar: bad header", 0);
    const std::uint32_t dim = get_u32(bytes, 4);
    const std::uint64_t count = get_u64(bytes, 8);
    const std::size_t record = 8 + 4 * static_cast<std::size_t>(dim);
    if (bytes.size() != 16 + count * record) throw ParseError("embedding sidecar: size does not match header", 0);
    std::map<DetId, std::vector<float>> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::size_t at = 16 + i * record;
        const auto id = static_cast<DetId>(get_u64(bytes, at));
        std::vector<float> e(dim);
        for (std::uint32_t k = 0; k < dim; ++k) e[k] = std::bit_cast<float>(get_u32(bytes, at + 8 + 4 * k));
        out.emplace(id, std::move(e));
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Sequence load_sequence_dir(const std::filesystem::path& dir) {
    Sequence seq;
    const auto info = read_seqinfo(dir / "seqinfo.ini");
    seq.seq_id = info.name.empty() ? dir.filename().string() : info.name;
    seq.frame_count = info.seq_length;
    seq.frame_rate = info.frame_rate;
    seq.image_width = info.im_width;
    seq.image_height = info.im_height;

    auto det = read_mot_file(dir / "det" / "det.txt", MotKind::detections);
    seq.detections = std::move(det.detections);
    const auto emb_path = dir / "det" / "embeddings.bin";
    if (std::filesystem::exists(emb_path)) {
        auto emb = decode_embeddings(read_text_file(emb_path));
        for (auto& d : seq.detections) {
            if (auto it = emb.find(d.det_id); it != emb.end()) d.embedding = std::move(it->second);
        }
    }
    const auto gt_path = dir / "gt" / "gt.txt";
    if (std::filesystem::exists(gt_path)) {
        auto gt = read_mot_file(gt_path, MotKind::ground_truth);
        gt.labels.seq_id = seq.seq_id;
        seq.ground_truth = std::move(gt.labels);
    }
    seq.validate();
    return seq;
}

void save_sequence_dir(const Sequence& seq, const std::filesystem::path& dir) {
    SeqInfo info;
    info.name = seq.seq_id;
    info.im_width = seq.image_width;
    info.im_height = seq.image_height;
    info.frame_rate = seq.frame_rate;
    info.seq_length = seq.frame_count;
    write_text_file(dir / "seqinfo.ini", write_seqinfo(info));
    write_text_file(dir / "det" / "det.txt", write_detections(seq.detections));
    if (std::any_of(seq.detections.begin(), seq.detections.end(), [](const Detection& d) { return d.has_embedding(); }))
        write_text_file(dir / "det" / "embeddings.bin", encode_embeddings(seq.detections));
    if (seq.ground_truth) write_text_file(dir / "gt" / "gt.txt", write_ground_truth(*seq.ground_truth));
}

}  // namespace tracklabel
