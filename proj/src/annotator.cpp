#include "tracklabel/annotator.hpp"

#include <algorithm>

#include "tracklabel/error.hpp"
#include "tracklabel/training.hpp"

namespace tracklabel {

long full_manual_cost(const LabelSet& gt) {
    std::map<TrackId, std::vector<int>> frames;
    for (const auto& e : gt.entries)
        if (e.evaluable) frames[e.track_id].push_back(e.frame);
    long clicks = 0;
    for (auto& [id, fs] : frames) {
        std::sort(fs.begin(), fs.end());
        clicks += 2 * static_cast<long>(fs.size());
        for (std::size_t i = 1; i < fs.size(); ++i)
            if (fs[i] == fs[i - 1] + 1) ++clicks;
    }
    return clicks;
}

OracleAnnotator::OracleAnnotator(const Sequence& seq, double iou_threshold) {
    if (!seq.ground_truth) throw DomainError("oracle annotator needs ground truth for " + seq.seq_id);
    const auto& gt = *seq.ground_truth;
    const auto m = match_detections(seq.detections, gt, iou_threshold);
    for (const auto& d : seq.detections) {
        auto it = m.find(d.det_id);
        if (it == m.end())
            matches_.emplace(d.det_id, std::nullopt);
        else
            matches_.emplace(d.det_id, Match{gt.entries[it->second].track_id, gt.entries[it->second].box});
    }
}

const std::optional<OracleAnnotator::Match>& OracleAnnotator::lookup(DetId id) const {
    auto it = matches_.find(id);
    if (it == matches_.end()) throw ProtocolError("query references unknown detection " + std::to_string(id));
    return it->second;
}

std::optional<TrackId> OracleAnnotator::identity(DetId det) const {
    const auto& m = lookup(det);
    return m ? std::optional<TrackId>(m->track) : std::nullopt;
}

std::optional<TrackId> OracleAnnotator::dominant_identity(const std::vector<DetId>& members) const {
    std::map<TrackId, int> votes;
    for (DetId id : members)
        if (const auto& m = lookup(id)) ++votes[m->track];
    std::optional<TrackId> best;
    int best_n = 0;
    for (const auto& [track, n] : votes)  // ascending track id, strict > keeps the lower on ties
        if (n > best_n) {
            best = track;
            best_n = n;
        }
    return best;
}

std::optional<AnnotatorResponse> OracleAnnotator::answer(const AnnotationQuery& q) {
    AnnotatorResponse r;
    r.query_id = q.query_id;
    r.kind = q.kind;
    r.responder = Responder::oracle;
    const std::vector<DetId> members = q.members.empty() ? std::vector<DetId>{q.subject} : q.members;
    switch (q.kind) {
        case QueryKind::validate_node: {
            std::size_t matched = 0;
            for (DetId id : members)
                if (lookup(id)) ++matched;
            r.accept = 2 * matched > members.size();
            break;
        }
        case QueryKind::refine_box: {
            const auto& m = lookup(q.subject);
            if (m) {
                r.accept = true;
                r.box = m->box;
            }
            break;
        }
        case QueryKind::associate: {
            const auto mine = dominant_identity(members);
            if (!mine) break;
            for (const auto& c : q.candidates) {
                const auto theirs = dominant_identity(c.members.empty() ? std::vector<DetId>{c.cluster_id} : c.members);
                if (theirs == mine) {
                    r.choice = c.cluster_id;
                    break;
                }
            }
            break;
        }
    }
    return r;
}

}  // namespace tracklabel
