#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>

#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"
#include "frontpage/llm_client.hpp"
#include "oracles.hpp"

using namespace frontpage;
using namespace frontpage::llm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Minimal chat-completion endpoint: answers with the user message reversed,
// after first failing `failures` times with `fail_status`.
class FakeChatServer {
public:
    explicit FakeChatServer(int failures = 0, int fail_status = 429) : failures_(failures), fail_status_(fail_status) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            {
                std::lock_guard lock(mutex_);
                last_body_ = json::parse(req.body);
                last_auth_ = req.get_header_value("Authorization");
            }
            if (failures_.fetch_sub(1) > 0) {
                res.status = fail_status_;
                res.set_content("slow down", "text/plain");
                return;
            }
            const auto user = json::parse(req.body)["messages"][1]["content"].get<std::string>();
            json reply{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", "echo:" + user}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeChatServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    int requests() const { return requests_.load(); }
    json last_body() const {
        std::lock_guard lock(mutex_);
        return last_body_;
    }
    std::string last_auth() const {
        std::lock_guard lock(mutex_);
        return last_auth_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> failures_;
    int fail_status_;
    std::atomic<int> requests_{0};
    mutable std::mutex mutex_;
    json last_body_;
    std::string last_auth_;
};

// A port with nothing listening on it: bind an ephemeral port, then close.
int closed_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

fs::path temp_file(const std::string& name) {
    auto p = fs::temp_directory_path() / ("frontpage_test_" + name);
    fs::remove_all(p);
    return p;
}

template <class Fn>
Errc error_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a frontpage::Error");
    return Errc::usage;
}

}  // namespace

TEST_SUITE("llm-client") {

TEST_CASE("prompt templates carry the published wording") {
    const auto sum = render_prompt(Task::summarize, {{"language", "Hebrew"}, {"text", "T"}});
    CHECK(sum.rfind("Please summarize the following text in Hebrew", 0) == 0);
    const auto m = render_prompt(Task::match, {{"article", "A"}, {"teaser", "S"}});
    CHECK(m.find("answer with 'Yes' if the text relates to the summary") != std::string::npos);
    CHECK(m.find("Only output 'Yes' or 'No'") != std::string::npos);
    const auto cov = render_prompt(Task::judge_coverage, {{"reference", "R"}, {"candidate", "C"}});
    CHECK(cov.find("All of the information in the reference summary can be found in the candidate summary") !=
          std::string::npos);
    const auto coh = render_prompt(Task::judge_coherence, {{"article", "A"}, {"summary", "S"}});
    CHECK(coh.find("one to five stars") != std::string::npos);
}

TEST_CASE("rendering is a single pass and reports missing slots") {
    CHECK(error_of([] { render_prompt(Task::summarize, {{"language", "Hebrew"}}); }) == Errc::missing_slot);
    const auto p = render_prompt(Task::match, {{"article", "{teaser}"}, {"teaser", "real"}});
    CHECK(p.find("Text: {teaser}") != std::string::npos);
    CHECK(p.find("Summary: real") != std::string::npos);
    // Distinct slot values give distinct prompts.
    CHECK(render_prompt(Task::match, {{"article", "a b"}, {"teaser", "c"}}) !=
          render_prompt(Task::match, {{"article", "a"}, {"teaser", "b c"}}));
    PromptTemplate t{Task::match, "{x} and {y} and {x}"};
    CHECK(t.slots() == std::vector<std::string>{"x", "y"});
}

TEST_CASE("few-shot rendering uses the shipped exemplars") {
    const auto lib = PromptLibrary::load(oracle::source_dir() / "data" / "prompts");
    REQUIRE(lib.exemplars(Task::summarize).size() >= kDefaultShots);
    const SlotMap slots{{"language", "English"}, {"text", "The final text."}};
    const auto zero = lib.render(Task::summarize, slots, 0);
    const auto three = lib.render(Task::summarize, slots, kDefaultShots);
    CHECK(three.size() > zero.size());
    CHECK(three.substr(three.size() - zero.size()) == zero);
    std::size_t count = 0;
    for (auto pos = three.find("Please summarize"); pos != std::string::npos; pos = three.find("Please summarize", pos + 1))
        ++count;
    CHECK(count == 4);
    CHECK(three.find(lib.exemplars(Task::summarize)[0].answer) != std::string::npos);
    CHECK(error_of([&] { lib.render(Task::match, {{"article", "a"}, {"teaser", "b"}}, 3); }) == Errc::invalid_argument);
}

TEST_CASE("sha-256 and retry schedule") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    RetryPolicy r;
    CHECK(r.delay_for(1) == std::chrono::milliseconds(250));
    CHECK(r.delay_for(2) == std::chrono::milliseconds(500));
    CHECK(r.delay_for(3) == std::chrono::milliseconds(1000));
    CHECK(r.delay_for(20) == std::chrono::milliseconds(8000));
}

TEST_CASE("replay cache hit makes no network call") {
    auto cache = std::make_shared<ReplayCache>();
    cache->store("prompt", "cached answer", {});
    FakeChatServer server;
    LlmClient client({}, cache, std::make_unique<HttpChatTransport>(server.url(), ""));
    CHECK(client.complete("prompt") == "cached answer");
    CHECK(client.network_calls() == 0);
    CHECK(server.requests() == 0);
}

TEST_CASE("replay cache file round trip is byte-identical") {
    const auto path = temp_file("cache.jsonl");
    {
        ReplayCache cache(path);
        cache.store("p1", "r1 with \"quotes\" and ünïcode", {}, "m");
        cache.store("p2", "r2", {0.0, 64}, "m");
        cache.store("p1", "ignored duplicate", {});
        CHECK(cache.size() == 2);
    }
    const std::string bytes = jsonl::read_text(path);
    ReplayCache reread(path);
    CHECK(reread.size() == 2);
    CHECK(reread.lookup("p1") == "r1 with \"quotes\" and ünïcode");
    CHECK(reread.lookup("p2") == "r2");
    CHECK_FALSE(reread.lookup("p3").has_value());
    reread.store("p1", "r1 with \"quotes\" and ünïcode", {});
    CHECK(jsonl::read_text(path) == bytes);
    fs::remove(path);
}

TEST_CASE("transport success is cached and requests follow the chat schema") {
    FakeChatServer server;
    const auto path = temp_file("live_cache.jsonl");
    auto cache = std::make_shared<ReplayCache>(path);
    ClientConfig cfg;
    cfg.model = "test-model";
    LlmClient client(cfg, cache, std::make_unique<HttpChatTransport>(server.url(), "secret"));
    CHECK(client.complete("hello") == "echo:hello");
    const auto body = server.last_body();
    CHECK(body["model"] == "test-model");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "hello");
    CHECK(server.last_auth() == "Bearer secret");
    CHECK(client.complete("hello") == "echo:hello");
    CHECK(server.requests() == 1);
    CHECK(ReplayCache(path).lookup("hello") == "echo:hello");
    fs::remove(path);
}

TEST_CASE("429 responses are retried with exponential backoff") {
    FakeChatServer server(2, 429);
    LlmClient client({}, nullptr, std::make_unique<HttpChatTransport>(server.url(), ""));
    std::vector<std::chrono::milliseconds> slept;
    client.set_sleeper([&](std::chrono::milliseconds d) { slept.push_back(d); });
    CHECK(client.complete("retry me") == "echo:retry me");
    CHECK(server.requests() == 3);
    CHECK(slept == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(250), std::chrono::milliseconds(500)});
}

TEST_CASE("persistent rate limiting and outages surface as errors") {
    FakeChatServer limited(100, 429);
    LlmClient a({}, nullptr, std::make_unique<HttpChatTransport>(limited.url(), ""));
    a.set_sleeper([](std::chrono::milliseconds) {});
    CHECK(error_of([&] { a.complete("x"); }) == Errc::rate_limited);
    CHECK(limited.requests() == 4);

    FakeChatServer broken(100, 503);
    LlmClient b({}, nullptr, std::make_unique<HttpChatTransport>(broken.url(), ""));
    b.set_sleeper([](std::chrono::milliseconds) {});
    CHECK(error_of([&] { b.complete("x"); }) == Errc::endpoint_unavailable);

    const std::string down = "http://127.0.0.1:" + std::to_string(closed_port()) + "/v1/chat/completions";
    LlmClient c({}, nullptr, std::make_unique<HttpChatTransport>(down, "", std::chrono::seconds(1)));
    c.set_sleeper([](std::chrono::milliseconds) {});
    CHECK(error_of([&] { c.complete("x"); }) == Errc::endpoint_unavailable);

    LlmClient offline({}, nullptr, nullptr);
    CHECK(error_of([&] { offline.complete("x"); }) == Errc::endpoint_unavailable);
    CHECK_FALSE(offline.has_transport());
}

TEST_CASE("batch results keep submission order") {
    FakeChatServer server;
    ClientConfig cfg;
    cfg.concurrency = 4;
    LlmClient client(cfg, nullptr, std::make_unique<HttpChatTransport>(server.url(), ""));
    std::vector<std::string> prompts;
    for (int i = 0; i < 24; ++i) prompts.push_back("prompt-" + std::to_string(i));
    const auto results = client.complete_batch(prompts);
    REQUIRE(results.size() == prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        REQUIRE(results[i].text.has_value());
        CHECK(*results[i].text == "echo:" + prompts[i]);
    }

    LlmClient offline({}, nullptr, nullptr);
    const auto failed = offline.complete_batch(prompts);
    for (const auto& r : failed) {
        CHECK_FALSE(r.text.has_value());
        CHECK(r.error_code == static_cast<int>(Errc::endpoint_unavailable));
    }
}

TEST_CASE("response parsing") {
    CHECK(parse_judge("4") == 4);
    CHECK(parse_judge("Score: 5") == 5);
    CHECK(parse_judge("Coherence (1-5): 3") == 3);
    CHECK(parse_judge("I'd say 2.") == 2);
    CHECK(error_of([] { parse_judge("excellent summary"); }) == Errc::unparseable_score);
    CHECK(error_of([] { parse_judge("4.5 out of 10"); }) == Errc::unparseable_score);
    CHECK(parse_yes_no("Yes") == YesNo::yes);
    CHECK(parse_yes_no("  No\n") == YesNo::no);
    CHECK(parse_yes_no("Yes, because it matches") == YesNo::other);
    CHECK(parse_yes_no("yes") == YesNo::other);
}

TEST_CASE("OCR post-correction guards against rewrites") {
    const auto prompts = PromptLibrary::defaults();
    auto prompt_for = [&](const std::string& text) {
        return prompts.render(Task::ocr_fix, {{"text", text}, {"language", "English"}});
    };
    auto cache = std::make_shared<ReplayCache>();
    cache->store(prompt_for("the cat"), "the cat", {});
    cache->store(prompt_for("tbe cat"), "the cat", {});
    cache->store(prompt_for("short"), "short short short", {});
    LlmClient client({}, cache, nullptr);

    const auto same = ocr_post_correct(client, prompts, "the cat", "English");
    CHECK(same.text == "the cat");
    CHECK_FALSE(same.applied);
    CHECK_FALSE(same.warning.has_value());

    const auto fixed = ocr_post_correct(client, prompts, "tbe cat", "English");
    CHECK(fixed.text == "the cat");
    CHECK(fixed.applied);

    const auto rewrite = ocr_post_correct(client, prompts, "short", "English");
    CHECK(rewrite.text == "short");
    CHECK_FALSE(rewrite.applied);
    CHECK(rewrite.warning.has_value());

    const auto missing = ocr_post_correct(client, prompts, "not cached", "English");
    CHECK(missing.text == "not cached");
    CHECK(missing.warning.has_value());
}

}  // TEST_SUITE
