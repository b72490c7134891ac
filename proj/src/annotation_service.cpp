#include "frontpage/annotation_service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <httplib.h>

#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"
#include "frontpage/unicode.hpp"

namespace frontpage::annotation {

using nlohmann::json;
using agreement::AnnotationRecord;
using agreement::QualityDimension;

std::string_view to_string(TaskStatus s) noexcept { return s == TaskStatus::done ? "done" : "pending"; }

json to_json(const Task& t) {
    return {{"id", t.id},
            {"item_id", t.item_id},
            {"kind", agreement::to_string(t.kind)},
            {"payload", t.payload},
            {"status", to_string(t.status)},
            {"assigned_to", t.assigned_to ? json(*t.assigned_to) : json(nullptr)}};
}

Task task_from_json(const json& j) {
    Task t;
    try {
        t.id = j.at("id").get<std::string>();
        t.item_id = j.at("item_id").get<std::string>();
        t.kind = agreement::annotation_task_from_string(j.at("kind").get<std::string>());
        t.payload = j.value("payload", json::object());
        t.status = j.value("status", std::string("pending")) == "done" ? TaskStatus::done : TaskStatus::pending;
        if (j.contains("assigned_to") && !j["assigned_to"].is_null())
            t.assigned_to = j["assigned_to"].get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("task record: ") + e.what());
    }
    return t;
}

QueueItem queue_item_from_json(const json& j) {
    QueueItem item;
    try {
        item.item_id = j.at("item_id").get<std::string>();
        item.payload = j.value("payload", json::object());
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("queue item: ") + e.what());
    }
    if (item.item_id.empty()) throw Error(Errc::schema_violation, "queue item needs an item_id");
    return item;
}

std::vector<QueueItem> items_from_pairs(std::span<const match::CandidatePair> pairs, const match::TextIndex& texts) {
    std::vector<QueueItem> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        QueueItem item;
        item.item_id = match::pair_item_id(p.teaser_id, p.article_id);
        item.payload = {{"teaser_id", p.teaser_id},
                        {"article_id", p.article_id},
                        {"teaser", texts.teaser(p.teaser_id)},
                        {"article", texts.article(p.article_id)},
                        {"score", p.score ? json(*p.score) : json(nullptr)}};
        out.push_back(std::move(item));
    }
    return out;
}

std::vector<QueueItem> items_from_samples(std::span<const dataset::Sample> samples) {
    std::vector<QueueItem> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        json articles = json::array();
        for (std::size_t i = 0; i < s.documents.size(); ++i)
            articles.push_back({{"id", s.document_ids[i]}, {"text", s.documents[i]}});
        QueueItem item;
        item.item_id = s.id;
        item.payload = {{"sample_id", s.id},
                        {"teaser", s.summary},
                        {"articles", articles},
                        {"length_category", text::to_string(s.length_category)},
                        {"language", s.language}};
        out.push_back(std::move(item));
    }
    return out;
}

std::vector<std::size_t> overlap_indices(std::size_t n, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw Error(Errc::invalid_argument, "overlap_fraction must lie in [0,1]");
    const auto count = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    std::vector<std::size_t> out;
    out.reserve(count);
    // Evenly spread over the selection so overlap is not concentrated at the head.
    for (std::size_t i = 0; i < count; ++i) out.push_back(i * n / count);
    return out;
}

namespace {

void append_with_overlap(std::vector<QueueItem>& out, std::span<const QueueItem> items, double fraction) {
    const auto dup = overlap_indices(items.size(), fraction);
    std::size_t next = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out.push_back(items[i]);
        if (next < dup.size() && dup[next] == i) {
            out.push_back(items[i]);
            ++next;
        }
    }
}

}  // namespace

std::vector<QueueItem> select_items(std::span<const QueueItem> items, AnnotationTask kind,
                                    const EnqueueOptions& options) {
    std::vector<QueueItem> out;
    if (kind == AnnotationTask::match_binary || !options.stratify) {
        append_with_overlap(out, items, options.overlap_fraction);
        return out;
    }
    std::map<text::LengthCategory, std::vector<QueueItem>> bands;
    for (const auto& item : items) {
        if (!item.payload.contains("length_category") || !item.payload["length_category"].is_string())
            throw Error(Errc::schema_violation, "quality item '" + item.item_id + "' lacks a length_category");
        bands[text::length_category_from_string(item.payload["length_category"].get<std::string>())].push_back(item);
    }
    if (bands.empty()) return out;
    std::size_t per = std::numeric_limits<std::size_t>::max();
    for (const auto& [_, v] : bands) per = std::min(per, v.size());
    if (options.per_band) per = std::min(per, *options.per_band);
    for (auto c : text::kLengthCategories) {
        auto it = bands.find(c);
        if (it == bands.end()) continue;
        append_with_overlap(out, std::span(it->second).first(per), options.overlap_fraction);
    }
    return out;
}

std::vector<AnnotationRecord> records_from_values(const std::string& annotator_id, const Task& task,
                                                  const json& values) {
    if (!values.is_object()) throw Error(Errc::incomplete_values, "judgment values must be an object");
    std::vector<AnnotationRecord> out;
    if (task.kind == AnnotationTask::match_binary) {
        if (!values.contains("match") || values["match"].is_null())
            throw Error(Errc::incomplete_values, "match judgment needs a 'match' value");
        const json& v = values["match"];
        int value = -1;
        if (v.is_boolean()) value = v.get<bool>() ? 1 : 0;
        else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) value = v.get<int>();
        else if (v.is_string()) {
            const auto s = unicode::fold_case(v.get<std::string>());
            if (s == "yes") value = 1;
            else if (s == "no") value = 0;
        }
        if (value < 0) throw Error(Errc::invalid_argument, "match value must be yes/no, true/false or 1/0");
        out.push_back({annotator_id, task.item_id, task.kind, value, std::nullopt});
        return out;
    }
    std::vector<std::string> missing;
    for (auto d : agreement::kQualityDimensions) {
        const std::string key(agreement::to_string(d));
        if (!values.contains(key) || values[key].is_null()) missing.push_back(key);
    }
    if (!missing.empty()) {
        std::string msg = "quality judgment is missing";
        for (const auto& m : missing) msg += " " + m;
        throw Error(Errc::incomplete_values, msg);
    }
    for (auto d : agreement::kQualityDimensions) {
        const json& v = values[std::string(agreement::to_string(d))];
        if (!v.is_number_integer() || v.get<int>() < 1 || v.get<int>() > 5)
            throw Error(Errc::invalid_argument,
                        "quality score for " + std::string(agreement::to_string(d)) + " must be an integer 1..5");
        out.push_back({annotator_id, task.item_id, task.kind, v.get<int>(), d});
    }
    return out;
}

json to_json(const LiveStats& s) {
    auto stat = [](bool available, const std::string& reason, json value) {
        json j{{"available", available}};
        if (available) j["value"] = std::move(value);
        else j["reason"] = reason;
        return j;
    };
    json kappa = stat(s.kappa.available, s.kappa.reason, s.kappa.value ? json(*s.kappa.value) : json(nullptr));
    if (s.confusion)
        kappa["confusion"] = {{"a", s.confusion->a}, {"b", s.confusion->b}, {"c", s.confusion->c}, {"d", s.confusion->d}};
    json alpha{{"available", s.alpha_available}};
    if (s.alpha_available) {
        alpha["value"] = *s.alpha.pooled;
        alpha["detail"] = agreement::to_json(s.alpha);
    } else {
        alpha["reason"] = s.alpha_reason;
    }
    json threshold{{"available", s.threshold_available}};
    if (s.threshold_available) {
        threshold["value"] = s.calibration.threshold;
        threshold["detail"] = match::to_json(s.calibration);
    } else {
        threshold["reason"] = s.threshold_reason;
    }
    return {{"progress",
             {{"tasks_total", s.tasks_total},
              {"tasks_done", s.tasks_done},
              {"tasks_assigned", s.tasks_assigned},
              {"done_by_annotator", s.done_by_annotator},
              {"records", s.records}}},
            {"kappa", kappa},
            {"alpha", alpha},
            {"threshold", threshold}};
}

Service::Service() = default;

Service::Service(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(*dir_);
    replay();
}

void Service::replay() {
    const auto tasks_path = *dir_ / "tasks.jsonl";
    const auto log_path = *dir_ / "log.jsonl";
    if (std::filesystem::exists(tasks_path)) {
        for (const auto& j : jsonl::read(tasks_path)) {
            Task t = task_from_json(j);
            t.status = TaskStatus::pending;
            t.assigned_to.reset();
            index_[t.id] = tasks_.size();
            item_ids_.insert(t.item_id);
            tasks_.push_back(std::move(t));
        }
    }
    if (!std::filesystem::exists(log_path)) return;
    for (const auto& ev : jsonl::read(log_path)) {
        const auto kind = ev.at("event").get<std::string>();
        const auto task_id = ev.at("task_id").get<std::string>();
        const auto annotator = ev.at("annotator").get<std::string>();
        if (!index_.contains(task_id))
            throw Error(Errc::malformed_document, "log refers to unknown task '" + task_id + "'");
        if (kind == "assign") {
            apply_assign(task_id, annotator);
        } else if (kind == "judgment") {
            apply_judgment(task_id, annotator, records_from_values(annotator, tasks_[index_[task_id]], ev.at("values")));
        } else {
            throw Error(Errc::malformed_document, "unknown log event '" + kind + "'");
        }
    }
}

void Service::append_log(const json& event) {
    if (!dir_) return;
    std::ofstream out(*dir_ / "log.jsonl", std::ios::app | std::ios::binary);
    out << jsonl::dump({event});
    out.flush();
    if (!out) throw Error(Errc::io_error, "cannot append to the judgment log");
}

void Service::append_tasks(std::span<const Task> tasks) {
    if (!dir_) return;
    std::vector<json> records;
    for (const auto& t : tasks) records.push_back(to_json(t));
    std::ofstream out(*dir_ / "tasks.jsonl", std::ios::app | std::ios::binary);
    out << jsonl::dump(records);
    out.flush();
    if (!out) throw Error(Errc::io_error, "cannot append to the task file");
}

void Service::apply_assign(const std::string& task_id, const std::string& annotator) {
    Task& t = tasks_[index_.at(task_id)];
    t.assigned_to = annotator;
    seen_items_[annotator].insert(t.item_id);
}

void Service::apply_judgment(const std::string& task_id, const std::string& annotator,
                             std::vector<AnnotationRecord> records) {
    Task& t = tasks_[index_.at(task_id)];
    t.status = TaskStatus::done;
    seen_items_[annotator].insert(t.item_id);
    records_.insert(records_.end(), records.begin(), records.end());
}

std::size_t Service::enqueue(std::span<const QueueItem> items, AnnotationTask kind, const EnqueueOptions& options) {
    std::lock_guard lock(mutex_);
    std::vector<QueueItem> fresh;
    std::set<std::string> incoming;
    for (const auto& item : items)
        if (!item_ids_.contains(item.item_id) && incoming.insert(item.item_id).second) fresh.push_back(item);
    const auto selected = select_items(fresh, kind, options);
    if (selected.empty()) throw Error(Errc::empty_input, "nothing to enqueue");
    std::vector<Task> created;
    for (const auto& item : selected) {
        Task t;
        char id[32];
        std::snprintf(id, sizeof id, "task-%06zu", tasks_.size() + created.size() + 1);
        t.id = id;
        t.item_id = item.item_id;
        t.kind = kind;
        t.payload = item.payload;
        created.push_back(std::move(t));
    }
    append_tasks(created);
    for (auto& t : created) {
        index_[t.id] = tasks_.size();
        item_ids_.insert(t.item_id);
        tasks_.push_back(std::move(t));
    }
    return created.size();
}

std::optional<Task> Service::next_task(const std::string& annotator_id) {
    if (annotator_id.empty()) throw Error(Errc::invalid_argument, "annotator id is required");
    std::lock_guard lock(mutex_);
    for (const auto& t : tasks_)
        if (t.status == TaskStatus::pending && t.assigned_to == annotator_id) return t;
    const auto& seen = seen_items_[annotator_id];
    for (auto& t : tasks_) {
        if (t.status != TaskStatus::pending || t.assigned_to || seen.contains(t.item_id)) continue;
        append_log({{"event", "assign"}, {"task_id", t.id}, {"annotator", annotator_id}});
        apply_assign(t.id, annotator_id);
        return t;
    }
    return std::nullopt;
}

std::vector<AnnotationRecord> Service::submit_judgment(const std::string& annotator_id, const std::string& task_id,
                                                       const json& values) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(task_id);
    if (it == index_.end()) throw Error(Errc::unknown_task, "no task '" + task_id + "'");
    const Task& t = tasks_[it->second];
    if (t.assigned_to != annotator_id)
        throw Error(Errc::not_assigned, "task '" + task_id + "' is not assigned to '" + annotator_id + "'");
    if (t.status == TaskStatus::done)
        throw Error(Errc::duplicate, "task '" + task_id + "' was already judged by '" + annotator_id + "'");
    auto records = records_from_values(annotator_id, t, values);
    append_log({{"event", "judgment"}, {"task_id", task_id}, {"annotator", annotator_id}, {"values", values}});
    apply_judgment(task_id, annotator_id, records);
    return records;
}

LiveStats Service::live_stats() const {
    std::lock_guard lock(mutex_);
    LiveStats s;
    s.tasks_total = tasks_.size();
    std::map<std::string, double> score_by_item;
    for (const auto& t : tasks_) {
        if (t.status == TaskStatus::done) {
            ++s.tasks_done;
            ++s.done_by_annotator[*t.assigned_to];
        } else if (t.assigned_to) {
            ++s.tasks_assigned;
        }
        if (t.kind == AnnotationTask::match_binary && t.payload.contains("score") && t.payload["score"].is_number())
            score_by_item.emplace(t.item_id, t.payload["score"].get<double>());
    }
    s.records = records_.size();

    std::vector<AnnotationRecord> binary, quality;
    std::set<std::string> binary_annotators;
    for (const auto& r : records_) {
        if (r.task == AnnotationTask::match_binary) {
            binary.push_back(r);
            binary_annotators.insert(r.annotator_id);
        } else {
            quality.push_back(r);
        }
    }

    if (binary_annotators.size() < 2) {
        s.kappa.reason = "needs binary judgments from two annotators";
    } else if (binary_annotators.size() > 2) {
        s.kappa.reason = "Cohen's kappa is defined for exactly two annotators; " +
                         std::to_string(binary_annotators.size()) + " have judged";
    } else {
        try {
            s.confusion = agreement::binary_confusion(binary);
            s.kappa.value = agreement::cohens_kappa(*s.confusion);
            s.kappa.available = true;
        } catch (const Error& e) {
            s.confusion.reset();
            s.kappa.reason = e.what();
        }
    }

    if (quality.empty()) {
        s.alpha_reason = "no quality judgments yet";
    } else {
        s.alpha = agreement::krippendorff_alpha(quality);
        s.alpha_available = s.alpha.pooled.has_value();
        if (!s.alpha_available)
            s.alpha_reason = s.alpha.notes.empty() ? "alpha undefined" : s.alpha.notes.front();
    }

    std::vector<match::ScoredLabel> scored;
    std::set<std::string> labeled;
    for (const auto& r : binary) {
        if (!labeled.insert(r.item_id).second) continue;  // first judgment per item
        auto it = score_by_item.find(r.item_id);
        if (it != score_by_item.end()) scored.push_back({it->second, r.value == 1});
    }
    if (scored.empty()) {
        s.threshold_reason = "no scored pairs labeled yet";
    } else {
        try {
            s.calibration = match::calibrate_threshold(scored);
            s.threshold_available = true;
        } catch (const Error& e) {
            s.threshold_reason = e.what();
        }
    }
    return s;
}

std::vector<AnnotationRecord> Service::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<Task> Service::tasks() const {
    std::lock_guard lock(mutex_);
    return tasks_;
}

std::optional<Task> Service::task(const std::string& task_id) const {
    std::lock_guard lock(mutex_);
    auto it = index_.find(task_id);
    if (it == index_.end()) return std::nullopt;
    return tasks_[it->second];
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

int status_for(Errc code) {
    switch (code) {
        case Errc::unknown_task: return 404;
        case Errc::not_assigned: return 403;
        case Errc::duplicate: return 409;
        default: return 400;
    }
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
    send_json(res, status_for(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(Errc::malformed_document, std::string("request body: ") + e.what());
    }
}

}  // namespace

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) {}

    template <class F>
    auto guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const std::exception& e) {
                send_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
            }
        };
    }
};

HttpServer::HttpServer(Service& service, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(service)) {
    auto& svr = impl_->server;
    Service* s = &service;

    svr.Get("/api/tasks/next", impl_->guarded([s](const httplib::Request& req, httplib::Response& res) {
        const auto annotator = req.get_param_value("annotator");
        if (annotator.empty()) throw Error(Errc::invalid_argument, "query parameter 'annotator' is required");
        auto t = s->next_task(annotator);
        send_json(res, 200, {{"task", t ? to_json(*t) : json(nullptr)}});
    }));

    svr.Post("/api/tasks/:id/judgment", impl_->guarded([s](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.is_object() || !body.contains("annotator") || !body["annotator"].is_string())
            throw Error(Errc::invalid_argument, "body needs an 'annotator' string");
        const json values = body.value("values", json());
        auto records = s->submit_judgment(body["annotator"].get<std::string>(), req.path_params.at("id"), values);
        json out = json::array();
        for (const auto& r : records) out.push_back(agreement::to_json(r));
        send_json(res, 200, {{"ok", true}, {"records", out}});
    }));

    svr.Get("/api/stats", impl_->guarded([s](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, to_json(s->live_stats()));
    }));

    svr.Get("/api/export", impl_->guarded([s](const httplib::Request&, httplib::Response& res) {
        std::vector<json> out;
        for (const auto& r : s->records()) out.push_back(agreement::to_json(r));
        res.status = 200;
        res.set_content(jsonl::dump(out), "application/x-ndjson");
    }));

    svr.Post("/api/queue", impl_->guarded([s](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.is_object() || !body.contains("items") || !body["items"].is_array())
            throw Error(Errc::invalid_argument, "body needs an 'items' array");
        const auto kind = agreement::annotation_task_from_string(body.value("kind", std::string("match_binary")));
        EnqueueOptions opt;
        opt.overlap_fraction = body.value("overlap_fraction", 0.0);
        opt.stratify = body.value("stratify", true);
        if (body.contains("per_band") && body["per_band"].is_number_unsigned())
            opt.per_band = body["per_band"].get<std::size_t>();
        std::vector<QueueItem> items;
        for (const auto& j : body["items"]) items.push_back(queue_item_from_json(j));
        const auto created = s->enqueue(items, kind, opt);
        send_json(res, 200, {{"created", created}});
    }));

    if (ui_dir) {
        if (!svr.set_mount_point("/", ui_dir->string()))
            throw Error(Errc::io_error, "UI directory '" + ui_dir->string() + "' does not exist");
    }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& svr = impl_->server;
    if (port == 0) {
        const int bound = svr.bind_to_any_port(host);
        if (bound < 0) throw Error(Errc::io_error, "cannot bind " + host);
        return bound;
    }
    if (!svr.bind_to_port(host, port)) throw Error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace frontpage::annotation
