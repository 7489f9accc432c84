#pragma once

#include <map>
#include <optional>
#include <string>

#include "tracklabel/query.hpp"
#include "tracklabel/types.hpp"

namespace tracklabel {

class Annotator {
public:
    virtual ~Annotator() = default;
    // Empty when no answer arrives (the query is then skipped at zero cost).
    virtual std::optional<AnnotatorResponse> answer(const AnnotationQuery& q) = 0;
    virtual std::string name() const = 0;
};

// 2 clicks per evaluable box plus 1 per link between consecutive evaluable
// frames of the same track.
long full_manual_cost(const LabelSet& gt);

// Answers from ground truth. Detections are matched to GT boxes once, per
// frame, greedily by IoU (ties to the lower det_id) on the boxes given here,
// so later box refinements do not change the matching.
class OracleAnnotator : public Annotator {
public:
    // Throws DomainError when `seq` has no ground truth.
    explicit OracleAnnotator(const Sequence& seq, double iou_threshold = 0.5);

    std::optional<AnnotatorResponse> answer(const AnnotationQuery& q) override;
    std::string name() const override { return "oracle"; }

    // GT track of a detection, if matched.
    std::optional<TrackId> identity(DetId det) const;
    // Majority track among matched members, ties to the lower track id.
    std::optional<TrackId> dominant_identity(const std::vector<DetId>& members) const;

private:
    struct Match {
        TrackId track;
        Box box;
    };
    std::map<DetId, std::optional<Match>> matches_;  // every known det_id

    const std::optional<Match>& lookup(DetId id) const;
};

}  // namespace tracklabel
