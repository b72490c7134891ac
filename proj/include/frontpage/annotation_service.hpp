#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "frontpage/agreement.hpp"
#include "frontpage/dataset.hpp"
#include "frontpage/matcher.hpp"

namespace frontpage::annotation {

using agreement::AnnotationTask;

enum class TaskStatus { pending, done };

std::string_view to_string(TaskStatus s) noexcept;

struct Task {
    std::string id;
    std::string item_id;  // shared by overlap copies of the same item
    AnnotationTask kind = AnnotationTask::match_binary;
    nlohmann::json payload = nlohmann::json::object();
    TaskStatus status = TaskStatus::pending;
    std::optional<std::string> assigned_to;
};

nlohmann::json to_json(const Task& t);
Task task_from_json(const nlohmann::json& j);

// One thing to be judged, before it becomes one or two tasks.
struct QueueItem {
    std::string item_id;
    nlohmann::json payload = nlohmann::json::object();
};

QueueItem queue_item_from_json(const nlohmann::json& j);

// Match items carry teaser and article text plus the backend score when known.
std::vector<QueueItem> items_from_pairs(std::span<const match::CandidatePair> pairs, const match::TextIndex& texts);
// Quality items carry the teaser, every source article and the length band.
std::vector<QueueItem> items_from_samples(std::span<const dataset::Sample> samples);

struct EnqueueOptions {
    double overlap_fraction = 0.0;
    // Quality tasks only: balance the four length bands by keeping the same
    // number of items from each non-empty band.
    bool stratify = true;
    std::optional<std::size_t> per_band;  // cap; defaults to the smallest band
};

// Items are selected in input order; duplicates for a second annotator are
// placed right after their original.
std::vector<QueueItem> select_items(std::span<const QueueItem> items, AnnotationTask kind,
                                    const EnqueueOptions& options);
std::vector<std::size_t> overlap_indices(std::size_t n, double fraction);

struct Stat {
    bool available = false;
    std::optional<double> value;
    std::string reason;
};

struct LiveStats {
    std::size_t tasks_total = 0;
    std::size_t tasks_done = 0;
    std::size_t tasks_assigned = 0;
    std::map<std::string, std::size_t> done_by_annotator;
    std::size_t records = 0;

    Stat kappa;
    std::optional<agreement::BinaryConfusion> confusion;

    bool alpha_available = false;
    agreement::AlphaReport alpha;
    std::string alpha_reason;

    bool threshold_available = false;
    match::CalibrationResult calibration;
    std::string threshold_reason;
};

nlohmann::json to_json(const LiveStats& s);

// Task queue plus judgment log. With a directory the service persists to
// <dir>/tasks.jsonl and the append-only <dir>/log.jsonl and replays both on
// construction. Every public call takes the same lock, so mutations are
// serialized and reads see a consistent snapshot.
class Service {
public:
    Service();  // in memory only
    explicit Service(std::filesystem::path dir);

    // Throws Error(empty_input) when nothing is selected. Items whose id is
    // already queued are skipped. Returns the number of tasks created.
    std::size_t enqueue(std::span<const QueueItem> items, AnnotationTask kind, const EnqueueOptions& options);

    // The annotator's open assignment if there is one, otherwise the first
    // unassigned pending task whose item they have not seen.
    std::optional<Task> next_task(const std::string& annotator_id);

    // values: {"match": true|false|"yes"|"no"|0|1} for match tasks, the four
    // quality dimensions as integers 1..5 for quality tasks. Throws
    // Error(unknown_task | not_assigned | duplicate | incomplete_values |
    // invalid_argument). Returns the records written.
    std::vector<agreement::AnnotationRecord> submit_judgment(const std::string& annotator_id,
                                                             const std::string& task_id,
                                                             const nlohmann::json& values);

    LiveStats live_stats() const;
    std::vector<agreement::AnnotationRecord> records() const;
    std::vector<Task> tasks() const;
    std::optional<Task> task(const std::string& task_id) const;

private:
    void apply_assign(const std::string& task_id, const std::string& annotator);
    void apply_judgment(const std::string& task_id, const std::string& annotator,
                        std::vector<agreement::AnnotationRecord> records);
    void append_log(const nlohmann::json& event);
    void append_tasks(std::span<const Task> tasks);
    void replay();

    mutable std::mutex mutex_;
    std::optional<std::filesystem::path> dir_;
    std::vector<Task> tasks_;
    std::map<std::string, std::size_t> index_;
    std::set<std::string> item_ids_;
    std::map<std::string, std::set<std::string>> seen_items_;  // annotator -> item ids
    std::vector<agreement::AnnotationRecord> records_;
};

// Parses judgment values for the given task kind; exposed for tests.
std::vector<agreement::AnnotationRecord> records_from_values(const std::string& annotator_id, const Task& task,
                                                             const nlohmann::json& values);

// HTTP front end. Routes:
//   GET  /api/tasks/next?annotator=ID   -> {"task": Task | null}
//   POST /api/tasks/{id}/judgment       body {"annotator": ID, "values": {...}}
//   GET  /api/stats
//   GET  /api/export                    -> JSONL annotation records
//   POST /api/queue                     body {"kind", "overlap_fraction", "items", ...}
// plus static files from ui_dir when given.
class HttpServer {
public:
    HttpServer(Service& service, std::optional<std::filesystem::path> ui_dir = std::nullopt);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Port 0 binds an ephemeral port. Returns the bound port.
    int bind(const std::string& host, int port);
    void listen();  // blocks until stop()
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

inline constexpr int kDefaultPort = 8787;

}  // namespace frontpage::annotation
