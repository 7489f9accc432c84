#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "tracklabel/active.hpp"
#include "tracklabel/engine.hpp"

namespace tracklabel {

// TRACKLABEL_DATA_ROOT when set, else `fallback`.
std::filesystem::path resolve_data_root(const std::filesystem::path& fallback);

struct ServiceOptions {
    std::filesystem::path data_root = "data";
    // Pending queries older than this are skipped at zero cost; 0 disables.
    std::chrono::milliseconds query_timeout{0};
};

// Annotation sessions persisted under <data_root>/sessions/<id>/ as
// session.json plus the pipeline artifacts and an append-only audit.jsonl.
// A restarted service replays the audit log of every stored session.
//
// Methods throw NotFoundError, ConflictError, ProtocolError and
// ParseError/ConfigError; serve() maps them to 404, 409, 409 and 400.
class AnnotationService {
public:
    explicit AnnotationService(ServiceOptions opts);
    ~AnnotationService();
    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    // Body: {"config": PipelineConfig, "session_id"?: str, "query_timeout_ms"?: int}
    // or a bare PipelineConfig.
    nlohmann::json create_session(const nlohmann::json& body);
    nlohmann::json list_sessions() const;
    nlohmann::json session_status(const std::string& id) const;
    nlohmann::json queries(const std::string& id, std::size_t limit);
    // Body: an annotator response, or {"query_id": q, "skip": true}.
    nlohmann::json respond(const std::string& id, const nlohmann::json& body);
    nlohmann::json labels(const std::string& id) const;
    nlohmann::json metrics(const std::string& id) const;

    struct Frame {
        std::string content_type;
        std::string body;
    };
    // Image bytes from <data_root>/sequences/<seq>/img1/, else the scene
    // description of a synthetic session target.
    Frame frame(const std::string& seq_id, int frame) const;

    // Skips timed-out queries of every session; returns how many.
    std::size_t expire_queries();
    bool wait_complete(const std::string& id, std::chrono::milliseconds timeout) const;

    // Blocks until stop(). Returns false if the port could not be bound.
    bool serve(const std::string& host, int port);
    // Binds to an ephemeral port and serves on a background thread.
    int start_background(const std::string& host = "127.0.0.1");
    void stop();

private:
    struct Session;
    ServiceOptions opts_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::atomic<bool> stopping_{false};
    std::thread sweeper_;
    std::thread server_thread_;
    struct Http;
    std::unique_ptr<Http> http_;

    std::shared_ptr<Session> find(const std::string& id) const;
    std::shared_ptr<Session> load_session(const std::filesystem::path& dir);
    void start_sweeper();
    void ensure_routes();
};

}  // namespace tracklabel
