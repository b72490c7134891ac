#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "frontpage/annotation_service.hpp"
#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"

using namespace frontpage;
using namespace frontpage::annotation;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<QueueItem> match_items(std::size_t n, std::size_t first = 0) {
    std::vector<QueueItem> out;
    for (std::size_t i = first; i < first + n; ++i)
        out.push_back({"pair-" + std::to_string(i), {{"teaser", "t"}, {"article", "a"}}});
    return out;
}

std::vector<QueueItem> quality_items(const std::map<std::string, std::size_t>& per_band) {
    std::vector<QueueItem> out;
    for (const auto& [band, n] : per_band)
        for (std::size_t i = 0; i < n; ++i)
            out.push_back({band + "-" + std::to_string(i), {{"teaser", "t"}, {"length_category", band}}});
    return out;
}

template <class F>
Errc code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::invalid_argument;
}

// Takes the next task for `who` and submits `value` on it.
std::string judge(Service& s, const std::string& who, const json& values) {
    auto t = s.next_task(who);
    REQUIRE(t);
    s.submit_judgment(who, t->id, values);
    return t->item_id;
}

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("frontpage_test_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_SUITE("annotation-service") {

TEST_CASE("queue sizes follow the overlap fraction") {
    Service s;
    CHECK(s.enqueue(match_items(50), AnnotationTask::match_binary, {}) == 50);

    Service t;
    CHECK(t.enqueue(match_items(100), AnnotationTask::match_binary, {.overlap_fraction = 0.25}) == 125);
    std::map<std::string, int> copies;
    for (const auto& task : t.tasks()) ++copies[task.item_id];
    CHECK(std::count_if(copies.begin(), copies.end(), [](const auto& kv) { return kv.second == 2; }) == 25);

    CHECK(overlap_indices(10, 0.0).empty());
    CHECK(overlap_indices(4, 1.0) == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(code_of([] { overlap_indices(4, 1.5); }) == Errc::invalid_argument);
}

TEST_CASE("quality items are balanced across length bands") {
    const auto items = quality_items({{"c0_25", 160}, {"c25_50", 100}, {"c50_100", 110}, {"c100_plus", 130}});
    const auto selected = select_items(items, AnnotationTask::quality_1_5, {});
    REQUIRE(selected.size() == 400);
    std::map<std::string, std::size_t> bands;
    for (const auto& i : selected) ++bands[i.payload["length_category"].get<std::string>()];
    for (const auto& [band, n] : bands) CHECK(n == 100);
    CHECK(select_items(items, AnnotationTask::quality_1_5, {.per_band = 20}).size() == 80);
    CHECK(select_items(items, AnnotationTask::quality_1_5, {.stratify = false}).size() == 500);

    std::vector<QueueItem> no_band{{"x", {{"teaser", "t"}}}};
    CHECK(code_of([&] { select_items(no_band, AnnotationTask::quality_1_5, {}); }) == Errc::schema_violation);
}

TEST_CASE("judgment errors") {
    Service s;
    s.enqueue(match_items(2), AnnotationTask::match_binary, {});
    const auto t = s.next_task("ann1");
    REQUIRE(t);
    CHECK(code_of([&] { s.submit_judgment("ann1", "task-999999", {{"match", true}}); }) == Errc::unknown_task);
    CHECK(code_of([&] { s.submit_judgment("ann2", t->id, {{"match", true}}); }) == Errc::not_assigned);
    CHECK(code_of([&] { s.submit_judgment("ann1", t->id, json::object()); }) == Errc::incomplete_values);
    CHECK(code_of([&] { s.submit_judgment("ann1", t->id, {{"match", "maybe"}}); }) == Errc::invalid_argument);
    s.submit_judgment("ann1", t->id, {{"match", "Yes"}});
    CHECK(code_of([&] { s.submit_judgment("ann1", t->id, {{"match", true}}); }) == Errc::duplicate);
    CHECK(code_of([&] { s.enqueue(match_items(2), AnnotationTask::match_binary, {}); }) == Errc::empty_input);

    Service q;
    q.enqueue(quality_items({{"c0_25", 1}}), AnnotationTask::quality_1_5, {});
    const auto qt = q.next_task("ann1");
    REQUIRE(qt);
    CHECK(code_of([&] { q.submit_judgment("ann1", qt->id, {{"coherence", 3}, {"fluency", 4}}); }) ==
          Errc::incomplete_values);
    CHECK(code_of([&] {
              q.submit_judgment("ann1", qt->id, {{"coherence", 3}, {"consistency", 6}, {"fluency", 4}, {"relevance", 2}});
          }) == Errc::invalid_argument);
    const auto recs =
        q.submit_judgment("ann1", qt->id, {{"coherence", 3}, {"consistency", 5}, {"fluency", 4}, {"relevance", 2}});
    CHECK(recs.size() == 4);
}

TEST_CASE("an annotator never receives the same item twice") {
    Service s;
    s.enqueue(match_items(20), AnnotationTask::match_binary, {.overlap_fraction = 1.0});
    std::set<std::string> seen_a, seen_b;
    while (auto t = s.next_task("a")) {
        CHECK(seen_a.insert(t->item_id).second);
        s.submit_judgment("a", t->id, {{"match", true}});
    }
    while (auto t = s.next_task("b")) {
        CHECK(seen_b.insert(t->item_id).second);
        s.submit_judgment("b", t->id, {{"match", false}});
    }
    CHECK(seen_a.size() == 20);
    CHECK(seen_b.size() == 20);
    CHECK(s.live_stats().tasks_done == 40);
    // The open assignment is returned again until it is judged.
    Service r;
    r.enqueue(match_items(3), AnnotationTask::match_binary, {});
    CHECK(r.next_task("a")->id == r.next_task("a")->id);
}

TEST_CASE("concurrent annotators receive disjoint tasks") {
    Service s;
    s.enqueue(match_items(400), AnnotationTask::match_binary, {});
    std::vector<std::vector<std::string>> taken(8);
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < taken.size(); ++w)
            workers.emplace_back([&, w] {
                const std::string who = "ann" + std::to_string(w);
                while (auto t = s.next_task(who)) {
                    taken[w].push_back(t->id);
                    s.submit_judgment(who, t->id, {{"match", w % 2 == 0}});
                }
            });
    }
    std::set<std::string> all;
    std::size_t total = 0;
    for (const auto& v : taken) {
        total += v.size();
        all.insert(v.begin(), v.end());
    }
    CHECK(total == 400);
    CHECK(all.size() == 400);
    CHECK(s.records().size() == 400);
}

TEST_CASE("state is rebuilt from the persisted log") {
    const auto dir = temp_dir("annotation_replay");
    std::vector<Task> tasks_before;
    std::vector<agreement::AnnotationRecord> records_before;
    std::string open_task;
    {
        Service s(dir);
        s.enqueue(match_items(10), AnnotationTask::match_binary, {.overlap_fraction = 0.5});
        for (int i = 0; i < 4; ++i) judge(s, "a", {{"match", i % 2 == 0}});
        for (int i = 0; i < 3; ++i) judge(s, "b", {{"match", true}});
        open_task = s.next_task("b")->id;
        tasks_before = s.tasks();
        records_before = s.records();
    }
    Service replayed(dir);
    CHECK(replayed.records() == records_before);
    const auto tasks_after = replayed.tasks();
    REQUIRE(tasks_after.size() == tasks_before.size());
    for (std::size_t i = 0; i < tasks_after.size(); ++i) CHECK(to_json(tasks_after[i]) == to_json(tasks_before[i]));
    CHECK(replayed.next_task("b")->id == open_task);
    fs::remove_all(dir);
}

TEST_CASE("live kappa and threshold") {
    Service s;
    std::vector<QueueItem> items;
    const double scores[] = {0.9, 0.8, 0.4, 0.3, 0.7, 0.6, 0.2, 0.1, 0.5, 0.45};
    for (int i = 0; i < 10; ++i)
        items.push_back({"p" + std::to_string(i), {{"teaser", "t"}, {"article", "a"}, {"score", scores[i]}}});
    s.enqueue(items, AnnotationTask::match_binary, {.overlap_fraction = 1.0});
    // Annotator a: yes on items 0,1,4,5; b agrees except on items 5 and 8.
    const std::set<int> yes_a{0, 1, 4, 5}, yes_b{0, 1, 4, 8};
    for (int i = 0; i < 10; ++i) {
        auto t = s.next_task("a");
        REQUIRE(t);
        const int idx = std::stoi(t->item_id.substr(1));
        s.submit_judgment("a", t->id, {{"match", yes_a.contains(idx)}});
    }
    for (int i = 0; i < 10; ++i) {
        auto t = s.next_task("b");
        REQUIRE(t);
        const int idx = std::stoi(t->item_id.substr(1));
        s.submit_judgment("b", t->id, {{"match", yes_b.contains(idx)}});
    }
    const auto stats = s.live_stats();
    REQUIRE(stats.kappa.available);
    // Both yes 3, both no 5, one disagreement each way: p_o = 0.8, p_e = 0.4*0.4 + 0.6*0.6 = 0.52.
    CHECK(*stats.kappa.value == doctest::Approx((0.8 - 0.52) / (1 - 0.52)));
    CHECK(*stats.kappa.value == doctest::Approx(agreement::cohens_kappa(std::span<const agreement::AnnotationRecord>(s.records()))));
    // First judgments (annotator a) against payload scores: yes at 0.9,0.8,0.7,0.6; best cut 0.6.
    REQUIRE(stats.threshold_available);
    CHECK(stats.calibration.threshold == doctest::Approx(0.6));
    CHECK(stats.calibration.f1 == doctest::Approx(1.0));

    Service small;
    std::vector<QueueItem> four{{"q0", {{"score", 0.9}}}, {"q1", {{"score", 0.8}}}, {"q2", {{"score", 0.4}}},
                                {"q3", {{"score", 0.3}}}};
    small.enqueue(four, AnnotationTask::match_binary, {});
    for (int i = 0; i < 4; ++i) judge(small, "a", {{"match", i < 2}});
    const auto st = small.live_stats();
    CHECK_FALSE(st.kappa.available);
    CHECK(st.threshold_available);
    CHECK(st.calibration.threshold == doctest::Approx(0.8));
}

TEST_CASE("HTTP endpoints") {
    Service s;
    HttpServer server(s);
    const int port = server.bind("127.0.0.1", 0);
    std::jthread loop([&] { server.listen(); });
    server.wait_until_ready();
    httplib::Client c("127.0.0.1", port);

    json queue{{"kind", "match_binary"}, {"overlap_fraction", 0.5},
               {"items", {{{"item_id", "x1"}, {"payload", {{"score", 0.9}}}}, {{"item_id", "x2"}, {"payload", {{"score", 0.1}}}}}}};
    auto r = c.Post("/api/queue", queue.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["created"] == 3);

    r = c.Post("/api/queue", json{{"kind", "ranking"}, {"items", json::array()}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);

    r = c.Get("/api/tasks/next?annotator=ann1");
    REQUIRE(r);
    CHECK(r->status == 200);
    const auto task = json::parse(r->body)["task"];
    REQUIRE(task.is_object());
    const std::string id = task["id"];

    const std::string path = "/api/tasks/" + id + "/judgment";
    r = c.Post(path, json{{"annotator", "ann2"}, {"values", {{"match", "yes"}}}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 403);
    CHECK(json::parse(r->body)["error"] == "not-assigned");
    r = c.Post(path, json{{"annotator", "ann1"}, {"values", json::object()}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    r = c.Post(path, json{{"annotator", "ann1"}, {"values", {{"match", "yes"}}}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    r = c.Post(path, json{{"annotator", "ann1"}, {"values", {{"match", "yes"}}}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 409);
    r = c.Post("/api/tasks/task-424242/judgment", json{{"annotator", "ann1"}, {"values", {{"match", 1}}}}.dump(),
               "application/json");
    REQUIRE(r);
    CHECK(r->status == 404);
    r = c.Post(path, "{not json", "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);

    r = c.Get("/api/tasks/next");
    REQUIRE(r);
    CHECK(r->status == 400);

    r = c.Get("/api/stats");
    REQUIRE(r);
    const auto stats = json::parse(r->body);
    CHECK(stats["kappa"]["available"] == false);

    r = c.Get("/api/export");
    REQUIRE(r);
    CHECK(r->status == 200);
    const auto lines = jsonl::parse(r->body);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0]["annotator_id"] == "ann1");
    CHECK(lines[0]["value"] == 1);

    server.stop();
}

}  // TEST_SUITE
