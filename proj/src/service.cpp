#include "tracklabel/service.hpp"

#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "tracklabel/error.hpp"
#include "tracklabel/mot_io.hpp"

namespace tracklabel {

using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

fs::path resolve_data_root(const fs::path& fallback) {
    if (const char* env = std::getenv("TRACKLABEL_DATA_ROOT"); env && *env) return env;
    return fallback;
}

struct AnnotationService::Session {
    std::string id;
    fs::path dir;
    PipelineConfig cfg;
    std::chrono::milliseconds timeout{0};
    Sequence target_raw;
    std::unique_ptr<LabelingSession> labeling;
    std::size_t written = 0;  // audit lines already on disk
    std::map<std::string, Clock::time_point> seen;
    mutable std::mutex mu;
    mutable std::condition_variable cv;

    void persist() {
        const auto& audit = labeling->audit();
        if (written == audit.size()) return;
        std::ofstream out(dir / "audit.jsonl", std::ios::app | std::ios::binary);
        for (; written < audit.size(); ++written) out << audit[written] << '\n';
        if (!out) throw Error("cannot append to " + (dir / "audit.jsonl").string());
        cv.notify_all();
    }
};

struct AnnotationService::Http {
    httplib::Server server;
};

namespace {

struct Prepared {
    Sequence target_raw;
    Sequence target;
    ScorerParams params;
    LabelingOptions opts;
    BudgetLedger ledger;
};

Prepared prepare(const PipelineConfig& cfg, const fs::path& dir) {
    PipelineOptions po;
    po.out_dir = dir;
    po.stop_after = Stage::selftrain;
    Prepared p;
    p.params = run_pipeline(cfg, po).selftrained;
    p.target_raw = make_target(cfg);
    p.target = admit(p.target_raw, cfg.admission);
    p.opts.hierarchy = cfg.hierarchy;
    p.opts.acquisition = cfg.acquisition;
    p.opts.seed = cfg.seed;
    p.ledger = make_ledger(cfg, p.target_raw);
    return p;
}

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
    return true;
}

json box_ref(const Detection& d) {
    return {{"det_id", d.det_id}, {"frame", d.frame}, {"box", to_json(d.box)}, {"confidence", d.confidence}};
}

}  // namespace

AnnotationService::AnnotationService(ServiceOptions opts) : opts_(std::move(opts)) {
    const fs::path root = opts_.data_root / "sessions";
    if (fs::exists(root)) {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(root))
            if (e.is_directory() && fs::exists(e.path() / "session.json")) dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) {
            auto s = load_session(d);
            sessions_[s->id] = s;
        }
    }
    start_sweeper();
}

AnnotationService::~AnnotationService() {
    stop();
    stopping_ = true;
    if (sweeper_.joinable()) sweeper_.join();
}

void AnnotationService::start_sweeper() {
    sweeper_ = std::thread([this] {
        while (!stopping_) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            try {
                expire_queries();
            } catch (const std::exception&) {
                // a failing session must not take the service down; the next
                // request to it surfaces the error
            }
        }
    });
}

std::shared_ptr<AnnotationService::Session> AnnotationService::load_session(const fs::path& dir) {
    const json meta = json::parse(read_text_file(dir / "session.json"));
    auto s = std::make_shared<Session>();
    s->id = meta.at("session_id").get<std::string>();
    s->dir = dir;
    s->cfg = pipeline_config_from_json(meta.at("config"));
    s->timeout = std::chrono::milliseconds(meta.value("query_timeout_ms", 0L));
    auto p = prepare(s->cfg, dir);
    s->target_raw = std::move(p.target_raw);
    std::vector<std::string> lines;
    if (fs::exists(dir / "audit.jsonl")) {
        std::istringstream in(read_text_file(dir / "audit.jsonl"));
        for (std::string line; std::getline(in, line);)
            if (!line.empty()) lines.push_back(line);
    }
    s->labeling = std::make_unique<LabelingSession>(
        LabelingSession::replay(std::move(p.target), std::move(p.params), p.opts, p.ledger, lines));
    const auto& audit = s->labeling->audit();
    if (audit.size() < lines.size() || !std::equal(lines.begin(), lines.end(), audit.begin()))
        throw ParseError("audit log of session " + s->id + " does not replay", 0);
    s->written = lines.size();
    s->persist();
    return s;
}

std::shared_ptr<AnnotationService::Session> AnnotationService::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
}

json AnnotationService::create_session(const json& body) {
    if (!body.is_object()) throw ParseError("session request must be an object", 0);
    json cfg_json = body.contains("config") ? body.at("config") : body;
    PipelineConfig cfg = pipeline_config_from_json(cfg_json);
    if (!cfg.target_dir.empty() && fs::path(cfg.target_dir).is_relative()) {
        const fs::path under_root = opts_.data_root / "sequences" / cfg.target_dir;
        if (fs::exists(under_root)) cfg.target_dir = fs::absolute(under_root).string();
    }
    long timeout_ms = static_cast<long>(opts_.query_timeout.count());
    if (body.contains("config") && body.contains("query_timeout_ms")) {
        if (!body.at("query_timeout_ms").is_number_integer()) throw ParseError("query_timeout_ms must be an integer", 0);
        timeout_ms = body.at("query_timeout_ms").get<long>();
    }

    std::string id;
    {
        std::lock_guard lock(mu_);
        if (body.contains("config") && body.contains("session_id")) {
            if (!body.at("session_id").is_string()) throw ParseError("session_id must be a string", 0);
            id = body.at("session_id").get<std::string>();
            if (!valid_id(id)) throw ParseError("session_id may only hold letters, digits, '-' and '_'", 0);
            if (sessions_.count(id) || fs::exists(opts_.data_root / "sessions" / id))
                throw ConflictError("session '" + id + "' already exists");
        } else {
            for (std::size_t n = sessions_.size() + 1;; ++n) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "s%04zu", n);
                if (!sessions_.count(buf) && !fs::exists(opts_.data_root / "sessions" / buf)) {
                    id = buf;
                    break;
                }
            }
        }
        // reserve the id while the pipeline runs
        sessions_[id] = nullptr;
    }
    try {
        auto s = std::make_shared<Session>();
        s->id = id;
        s->dir = opts_.data_root / "sessions" / id;
        s->cfg = cfg;
        s->timeout = std::chrono::milliseconds(timeout_ms);
        fs::create_directories(s->dir);
        write_text_file(s->dir / "session.json",
                        json{{"session_id", id}, {"config", to_json(cfg)}, {"query_timeout_ms", timeout_ms}}.dump(2) +
                            "\n");
        auto p = prepare(cfg, s->dir);
        s->target_raw = std::move(p.target_raw);
        s->labeling = std::make_unique<LabelingSession>(std::move(p.target), std::move(p.params), p.opts, p.ledger);
        s->persist();
        std::lock_guard lock(mu_);
        sessions_[id] = s;
    } catch (...) {
        std::lock_guard lock(mu_);
        sessions_.erase(id);
        std::error_code ec;
        fs::remove_all(opts_.data_root / "sessions" / id, ec);
        throw;
    }
    return session_status(id);
}

json AnnotationService::list_sessions() const {
    std::vector<std::string> ids;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, s] : sessions_)
            if (s) ids.push_back(id);
    }
    json out = json::array();
    for (const auto& id : ids) out.push_back(session_status(id));
    return {{"sessions", out}};
}

json AnnotationService::session_status(const std::string& id) const {
    auto s = find(id);
    if (!s) throw NotFoundError("session '" + id + "' is still being created");
    std::lock_guard lock(s->mu);
    const auto& L = *s->labeling;
    return {{"session_id", s->id},
            {"seq_id", L.sequence().seq_id},
            {"config_hash", config_hash(s->cfg)},
            {"stage", L.complete() ? "complete" : "labeling"},
            {"level", L.level()},
            {"complete", L.complete()},
            {"pending", L.pending().size()},
            {"budget", to_json(L.ledger())}};
}

json AnnotationService::queries(const std::string& id, std::size_t limit) {
    auto s = find(id);
    if (!s) throw NotFoundError("session '" + id + "' is still being created");
    std::lock_guard lock(s->mu);
    const auto& L = *s->labeling;
    std::map<DetId, const Detection*> dets;
    for (const auto& d : L.sequence().detections) dets[d.det_id] = &d;
    auto boxes = [&](const std::vector<DetId>& ids, std::set<int>& frames) {
        json arr = json::array();
        for (DetId m : ids) {
            auto it = dets.find(m);
            if (it == dets.end()) continue;
            arr.push_back(box_ref(*it->second));
            frames.insert(it->second->frame);
        }
        return arr;
    };
    json qs = json::array();
    const auto now = Clock::now();
    for (const auto& q : L.pending(limit)) {
        s->seen.emplace(q.query_id, now);
        json j = to_json(q);
        std::set<int> frames;
        j["subject_boxes"] = boxes(q.members.empty() ? std::vector<DetId>{q.subject} : q.members, frames);
        for (std::size_t i = 0; i < q.candidates.size(); ++i)
            j["candidates"][i]["boxes"] = boxes(q.candidates[i].members, frames);
        j["frames"] = frames;
        qs.push_back(std::move(j));
    }
    return {{"session_id", s->id},
            {"seq_id", L.sequence().seq_id},
            {"level", L.level()},
            {"complete", L.complete()},
            {"budget", to_json(L.ledger())},
            {"queries", qs}};
}

json AnnotationService::respond(const std::string& id, const json& body) {
    auto s = find(id);
    if (!s) throw NotFoundError("session '" + id + "' is still being created");
    std::lock_guard lock(s->mu);
    auto& L = *s->labeling;
    long clicks = 0;
    std::string qid;
    bool skipped = false;
    if (body.is_object() && body.contains("skip")) {
        if (!body.at("skip").is_boolean() || !body.contains("query_id") || !body.at("query_id").is_string())
            throw ParseError("skip needs {\"query_id\": str, \"skip\": true}", 0);
        qid = body.at("query_id").get<std::string>();
        if (body.at("skip").get<bool>()) {
            L.skip(qid);
            skipped = true;
        }
    } else {
        const AnnotatorResponse r = response_from_json(body);
        qid = r.query_id;
        try {
            clicks = L.submit(r);
        } catch (const Error&) {
            s->persist();  // keeps the "rejected" audit record
            throw;
        }
    }
    s->seen.erase(qid);
    s->persist();
    return {{"session_id", s->id},
            {"query_id", qid},
            {"skipped", skipped},
            {"clicks", clicks},
            {"level", L.level()},
            {"complete", L.complete()},
            {"budget", to_json(L.ledger())}};
}

json AnnotationService::labels(const std::string& id) const {
    auto s = find(id);
    if (!s) throw NotFoundError("session '" + id + "' is still being created");
    std::lock_guard lock(s->mu);
    const LabelSet l = quantize_labels(s->labeling->labels());
    json entries = json::array();
    for (const auto& e : l.entries)
        entries.push_back({{"frame", e.frame},
                           {"track_id", e.track_id},
                           {"box", to_json(e.box)},
                           {"provenance", to_string(e.provenance)}});
    return {{"session_id", s->id},
            {"seq_id", l.seq_id},
            {"complete", s->labeling->complete()},
            {"entries", entries},
            {"mot", write_labels(l)},
            {"provenance", write_provenance(l)}};
}

json AnnotationService::metrics(const std::string& id) const {
    auto s = find(id);
    if (!s) throw NotFoundError("session '" + id + "' is still being created");
    std::lock_guard lock(s->mu);
    if (!s->target_raw.ground_truth) throw NotFoundError("session '" + id + "' has no ground truth");
    const auto& gt = *s->target_raw.ground_truth;
    MetricsReport m = evaluate(quantize_labels(s->labeling->labels()), gt);
    m.clicks = s->labeling->ledger().spent_total();
    const long full = full_manual_cost(gt);
    m.budget_fraction = full > 0 ? static_cast<double>(m.clicks) / static_cast<double>(full) : 0.0;
    json j = to_json(m);
    j["session_id"] = s->id;
    j["complete"] = s->labeling->complete();
    return j;
}

AnnotationService::Frame AnnotationService::frame(const std::string& seq_id, int frame) const {
    if (!valid_id(seq_id)) throw NotFoundError("unknown sequence '" + seq_id + "'");
    const fs::path img_dir = opts_.data_root / "sequences" / seq_id / "img1";
    char name[32];
    for (const char* ext : {".jpg", ".png"}) {
        std::snprintf(name, sizeof name, "%06d%s", frame, ext);
        if (fs::exists(img_dir / name))
            return Frame{std::string(ext) == ".jpg" ? "image/jpeg" : "image/png", read_text_file(img_dir / name)};
    }
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, s] : sessions_)
            if (s) all.push_back(s);
    }
    for (const auto& s : all) {
        std::lock_guard lock(s->mu);
        const Sequence& seq = s->target_raw;
        if (seq.seq_id != seq_id || !s->cfg.target_dir.empty()) continue;
        if (frame < 1 || frame > seq.frame_count) throw NotFoundError("frame out of range");
        json shapes = json::array();
        for (const auto& sh : scene_at(seq, frame))
            shapes.push_back({{"object", sh.object}, {"box", to_json(sh.box)}, {"visibility", sh.visibility}});
        json dets = json::array();
        for (const auto& d : s->labeling->sequence().detections)
            if (d.frame == frame) dets.push_back(box_ref(d));
        json j = {{"kind", "scene"},
                  {"seq_id", seq.seq_id},
                  {"frame", frame},
                  {"image_width", seq.image_width},
                  {"image_height", seq.image_height},
                  {"shapes", shapes},
                  {"detections", dets}};
        return Frame{"application/json", j.dump()};
    }
    throw NotFoundError("no frame " + std::to_string(frame) + " for sequence '" + seq_id + "'");
}

std::size_t AnnotationService::expire_queries() {
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, s] : sessions_)
            if (s && s->timeout.count() > 0) all.push_back(s);
    }
    std::size_t n = 0;
    for (const auto& s : all) {
        std::lock_guard lock(s->mu);
        const auto now = Clock::now();
        for (const auto& q : s->labeling->pending()) {
            auto [it, fresh] = s->seen.emplace(q.query_id, now);
            if (fresh || now - it->second < s->timeout) continue;
            s->labeling->skip(q.query_id);
            s->seen.erase(it);
            ++n;
        }
        s->persist();
    }
    return n;
}

bool AnnotationService::wait_complete(const std::string& id, std::chrono::milliseconds timeout) const {
    auto s = find(id);
    if (!s) return false;
    std::unique_lock lock(s->mu);
    return s->cv.wait_for(lock, timeout, [&] { return s->labeling->complete() || stopping_.load(); }) &&
           s->labeling->complete();
}

namespace {

void reply_error(httplib::Response& res, int status, const char* kind, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", kind}, {"message", message}}.dump(), "application/json");
}

template <class F>
httplib::Server::Handler guarded(F fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const NotFoundError& e) {
            reply_error(res, 404, e.kind(), e.what());
        } catch (const ConflictError& e) {
            reply_error(res, 409, e.kind(), e.what());
        } catch (const ProtocolError& e) {
            reply_error(res, 409, e.kind(), e.what());
        } catch (const Error& e) {
            reply_error(res, 400, e.kind(), e.what());
        } catch (const json::exception& e) {
            reply_error(res, 400, "parse", e.what());
        } catch (const std::exception& e) {
            reply_error(res, 500, "internal", e.what());
        }
    };
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("request body is not JSON: ") + e.what(), 0);
    }
}

void send(httplib::Response& res, const json& j) { res.set_content(j.dump(), "application/json"); }

}  // namespace

void AnnotationService::ensure_routes() {
    if (!http_) {
        http_ = std::make_unique<Http>();
        auto& svr = http_->server;
        svr.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     res.status = 201;
                     send(res, create_session(parse_body(req)));
                 }));
        svr.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
                    send(res, list_sessions());
                }));
        svr.Get(R"(/sessions/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    send(res, session_status(req.matches[1]));
                }));
        svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/queries)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                    std::size_t limit = static_cast<std::size_t>(-1);
                    if (req.has_param("limit")) {
                        const std::string v = req.get_param_value("limit");
                        try {
                            std::size_t used = 0;
                            const long n = std::stol(v, &used);
                            if (used != v.size() || n < 0) throw std::invalid_argument(v);
                            limit = static_cast<std::size_t>(n);
                        } catch (const std::exception&) {
                            throw ParseError("limit must be a non-negative integer", 0);
                        }
                    }
                    send(res, queries(req.matches[1], limit));
                }));
        svr.Post(R"(/sessions/([A-Za-z0-9_-]+)/responses)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                     send(res, respond(req.matches[1], parse_body(req)));
                 }));
        svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/labels)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                    send(res, labels(req.matches[1]));
                }));
        svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/metrics)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                    send(res, metrics(req.matches[1]));
                }));
        svr.Get(R"(/frames/([^/]+)/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    int f = 0;
                    try {
                        f = std::stoi(req.matches[2]);
                    } catch (const std::exception&) {
                        throw NotFoundError("bad frame number");
                    }
                    auto fr = frame(req.matches[1], f);
                    res.set_content(fr.body, fr.content_type);
                }));
    }
}

bool AnnotationService::serve(const std::string& host, int port) {
    ensure_routes();
    return http_->server.listen(host, port);
}

int AnnotationService::start_background(const std::string& host) {
    ensure_routes();
    const int port = http_->server.bind_to_any_port(host);
    if (port < 0) throw Error("cannot bind " + host);
    server_thread_ = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    return port;
}

void AnnotationService::stop() {
    if (http_) http_->server.stop();
    if (server_thread_.joinable()) server_thread_.join();
}

}  // namespace tracklabel
