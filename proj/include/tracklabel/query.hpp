#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tracklabel/types.hpp"

namespace tracklabel {

enum class QueryKind { validate_node, refine_box, associate };

std::string_view to_string(QueryKind k);
QueryKind query_kind_from_string(std::string_view s);

// Clicks charged per answered query: validate 1, refine 2, associate 1.
int query_cost(QueryKind k);

struct QueryCandidate {
    DetId cluster_id = 0;
    double score = 0.5;
    std::vector<DetId> members;
};

struct AnnotationQuery {
    std::string query_id;  // "q<serial>", unique within a session
    QueryKind kind = QueryKind::validate_node;
    DetId subject = 0;  // det_id at the node level, cluster id above
    std::vector<DetId> members;
    std::vector<QueryCandidate> candidates;  // associate only, by score descending
    double uncertainty = 0.0;
    int level = 0;
    int cost = 1;
    int bucket = 0;  // level index, or -1 for the box-refinement reserve
};

enum class Responder { oracle, human };

struct AnnotatorResponse {
    std::string query_id;
    QueryKind kind = QueryKind::validate_node;
    // validate-node: accept/reject. refine-box: false means reject.
    bool accept = false;
    std::optional<Box> box;        // refine-box when accepted
    std::optional<DetId> choice;   // associate; empty means "none of these"
    Responder responder = Responder::oracle;
    std::string timestamp;         // optional, free-form (wall clock)
};

// JSON field names are part of the service contract (see docs/api.md).
nlohmann::json to_json(const AnnotationQuery& q);
AnnotationQuery query_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnnotatorResponse& r);
// Throws ParseError on missing or mistyped fields.
AnnotatorResponse response_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Box& b);
Box box_from_json(const nlohmann::json& j);

}  // namespace tracklabel
