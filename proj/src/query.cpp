#include "tracklabel/query.hpp"

#include "tracklabel/error.hpp"

namespace tracklabel {

using nlohmann::json;

std::string_view to_string(QueryKind k) {
    switch (k) {
        case QueryKind::validate_node: return "validate-node";
        case QueryKind::refine_box: return "refine-box";
        case QueryKind::associate: return "associate";
    }
    return "validate-node";
}

QueryKind query_kind_from_string(std::string_view s) {
    if (s == "validate-node") return QueryKind::validate_node;
    if (s == "refine-box") return QueryKind::refine_box;
    if (s == "associate") return QueryKind::associate;
    throw ParseError("unknown query kind '" + std::string(s) + "'", 0);
}

int query_cost(QueryKind k) { return k == QueryKind::refine_box ? 2 : 1; }

json to_json(const Box& b) { return json::array({b.left, b.top, b.width, b.height}); }

Box box_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw ParseError("box must be [left, top, width, height]", 0);
    for (const auto& v : j)
        if (!v.is_number()) throw ParseError("box coordinates must be numbers", 0);
    return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json to_json(const AnnotationQuery& q) {
    json cands = json::array();
    for (const auto& c : q.candidates)
        cands.push_back({{"cluster_id", c.cluster_id}, {"score", c.score}, {"members", c.members}});
    return {{"query_id", q.query_id}, {"kind", to_string(q.kind)}, {"subject", q.subject},
            {"members", q.members},   {"candidates", cands},        {"uncertainty", q.uncertainty},
            {"level", q.level},       {"cost", q.cost},             {"bucket", q.bucket}};
}

namespace {

template <class T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError(std::string("field '") + key + "' has the wrong type", 0);
    }
}

}  // namespace

AnnotationQuery query_from_json(const json& j) {
    AnnotationQuery q;
    q.query_id = field<std::string>(j, "query_id");
    q.kind = query_kind_from_string(field<std::string>(j, "kind"));
    q.subject = field<DetId>(j, "subject");
    q.members = field<std::vector<DetId>>(j, "members");
    for (const auto& c : field<json>(j, "candidates"))
        q.candidates.push_back(QueryCandidate{field<DetId>(c, "cluster_id"), field<double>(c, "score"),
                                              field<std::vector<DetId>>(c, "members")});
    q.uncertainty = field<double>(j, "uncertainty");
    q.level = field<int>(j, "level");
    q.cost = field<int>(j, "cost");
    q.bucket = field<int>(j, "bucket");
    return q;
}

json to_json(const AnnotatorResponse& r) {
    json j = {{"query_id", r.query_id},
              {"kind", to_string(r.kind)},
              {"responder", r.responder == Responder::oracle ? "oracle" : "human"}};
    switch (r.kind) {
        case QueryKind::validate_node: j["decision"] = r.accept ? "accept" : "reject"; break;
        case QueryKind::refine_box:
            if (r.accept && r.box)
                j["box"] = to_json(*r.box);
            else
                j["decision"] = "reject";
            break;
        case QueryKind::associate:
            j["choice"] = r.choice ? json(*r.choice) : json(nullptr);
            break;
    }
    if (!r.timestamp.empty()) j["timestamp"] = r.timestamp;
    return j;
}

AnnotatorResponse response_from_json(const json& j) {
    AnnotatorResponse r;
    r.query_id = field<std::string>(j, "query_id");
    r.kind = query_kind_from_string(field<std::string>(j, "kind"));
    const std::string who = j.contains("responder") ? field<std::string>(j, "responder") : "human";
    if (who == "oracle")
        r.responder = Responder::oracle;
    else if (who == "human")
        r.responder = Responder::human;
    else
        throw ParseError("unknown responder '" + who + "'", 0);
    switch (r.kind) {
        case QueryKind::validate_node: {
            const auto d = field<std::string>(j, "decision");
            if (d != "accept" && d != "reject") throw ParseError("decision must be accept or reject", 0);
            r.accept = d == "accept";
            break;
        }
        case QueryKind::refine_box:
            if (j.contains("box")) {
                r.box = box_from_json(j.at("box"));
                if (!r.box->valid()) throw ParseError("refined box needs positive width and height", 0);
                r.accept = true;
            } else if (field<std::string>(j, "decision") != "reject") {
                throw ParseError("refine-box needs a box or decision=reject", 0);
            }
            break;
        case QueryKind::associate:
            if (!j.contains("choice")) throw ParseError("missing field 'choice'", 0);
            if (!j.at("choice").is_null()) r.choice = field<DetId>(j, "choice");
            break;
    }
    if (j.contains("timestamp")) r.timestamp = field<std::string>(j, "timestamp");
    return r;
}

}  // namespace tracklabel
