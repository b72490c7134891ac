#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace frontpage::llm {

// ---------------------------------------------------------------------------
// Prompts

enum class Task { match, summarize, judge_coherence, judge_consistency, judge_coverage, ocr_fix };

std::string_view to_string(Task t) noexcept;
Task task_from_string(std::string_view s);

using SlotMap = std::map<std::string, std::string, std::less<>>;

// Template text with `{name}` slots. Rendering is a single left-to-right pass,
// so braces inside slot values are never re-expanded.
struct PromptTemplate {
    Task task = Task::match;
    std::string text;

    std::vector<std::string> slots() const;
    std::string render(const SlotMap& values) const;  // throws missing_slot
};

// One worked example for few-shot prompting: slot values plus the expected
// answer appended after the rendered prompt.
struct Exemplar {
    SlotMap slots;
    std::string answer;
};

class PromptLibrary {
public:
    // Built-in templates.
    static PromptLibrary defaults();
    // Defaults overridden by `<task>.txt` templates and `<task>.fewshot.jsonl`
    // exemplar files found in `dir`.
    static PromptLibrary load(const std::filesystem::path& dir);

    const PromptTemplate& get(Task task) const;
    const std::vector<Exemplar>& exemplars(Task task) const;
    void set_template(PromptTemplate t);
    void set_exemplars(Task task, std::vector<Exemplar> ex);

    // shots == 0 renders the bare prompt; otherwise the first `shots`
    // exemplars are rendered (prompt + answer) ahead of it.
    std::string render(Task task, const SlotMap& slots, std::size_t shots = 0) const;

private:
    std::map<Task, PromptTemplate> templates_;
    std::map<Task, std::vector<Exemplar>> exemplars_;
};

inline constexpr std::size_t kDefaultShots = 3;

std::string render_prompt(Task task, const SlotMap& slots);

// ---------------------------------------------------------------------------
// Replay cache

std::string sha256_hex(std::string_view data);

struct CompletionParams {
    double temperature = 0.0;
    int max_tokens = 512;
};

// Content-addressed, append-only JSONL store of completions keyed by the
// SHA-256 of the prompt. Safe for concurrent readers with one appender.
class ReplayCache {
public:
    ReplayCache() = default;  // in-memory only
    explicit ReplayCache(std::filesystem::path path);

    std::optional<std::string> lookup(std::string_view prompt) const;
    // Appends unless an entry for the prompt already exists.
    void store(std::string_view prompt, std::string_view response, const CompletionParams& params,
               std::string_view model = {});
    std::size_t size() const;
    const std::optional<std::filesystem::path>& path() const { return path_; }

    static nlohmann::json make_entry(std::string_view prompt, std::string_view response,
                                     const CompletionParams& params, std::string_view model);

private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::string> entries_;
};

// ---------------------------------------------------------------------------
// Transport

struct ChatRequest {
    std::string model;
    std::string system;
    std::string user;
    CompletionParams params;
};

struct TransportResult {
    enum class Status { ok, unavailable, rate_limited, failed };
    Status status = Status::ok;
    std::string text;
    int http_status = 0;
    std::string detail;
};

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual TransportResult send(const ChatRequest& request) = 0;
};

// Chat-completion endpoint over HTTP(S): POST {"model","messages":[system,user],
// "temperature","max_tokens"}; reads choices[0].message.content.
class HttpChatTransport : public ChatTransport {
public:
    HttpChatTransport(std::string url, std::string api_key, std::chrono::milliseconds timeout = std::chrono::seconds(60));
    TransportResult send(const ChatRequest& request) override;

private:
    std::string origin_;
    std::string path_;
    std::string api_key_;
    std::chrono::milliseconds timeout_;
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds base_delay{250};
    std::chrono::milliseconds max_delay{8000};

    std::chrono::milliseconds delay_for(int attempt) const;  // attempt is 1-based
};

struct ClientConfig {
    std::string model = "default";
    std::string system_prompt = "You are a helpful assistant.";
    RetryPolicy retry;
    std::size_t concurrency = 4;
};

// Environment: FRONTPAGE_LLM_ENDPOINT (chat-completions URL),
// FRONTPAGE_LLM_API_KEY, FRONTPAGE_LLM_MODEL.
struct EndpointSettings {
    std::string url;
    std::string api_key;
    std::string model;
};
std::optional<EndpointSettings> endpoint_from_env();

class LlmClient {
public:
    // `transport` may be null: the client then serves from the cache only.
    LlmClient(ClientConfig config, std::shared_ptr<ReplayCache> cache, std::unique_ptr<ChatTransport> transport);

    // Builds a client from environment settings and an optional cache file.
    static std::unique_ptr<LlmClient> from_environment(std::optional<std::filesystem::path> cache_path, ClientConfig config = {});

    // Cache first; otherwise the transport with retry on unavailable /
    // rate-limited. Throws Error(endpoint_unavailable | rate_limited).
    std::string complete(std::string_view prompt, const CompletionParams& params = {});

    // Bounded-concurrency fan-out; results in submission order. Each slot holds
    // either the completion or the error message.
    struct BatchResult {
        std::optional<std::string> text;
        std::optional<std::string> error;
        std::optional<int> error_code;  // static_cast<int>(Errc)
    };
    std::vector<BatchResult> complete_batch(std::span<const std::string> prompts, const CompletionParams& params = {});

    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleep_ = std::move(sleeper); }
    bool has_transport() const { return transport_ != nullptr; }
    std::size_t network_calls() const { return network_calls_.load(); }
    ReplayCache& cache() { return *cache_; }
    const ClientConfig& config() const { return config_; }

private:
    ClientConfig config_;
    std::shared_ptr<ReplayCache> cache_;
    std::unique_ptr<ChatTransport> transport_;
    std::function<void(std::chrono::milliseconds)> sleep_;
    std::atomic<std::size_t> network_calls_{0};
};

// ---------------------------------------------------------------------------
// Response handling

enum class JudgeDimension { coherence, consistency, coverage };
std::string_view to_string(JudgeDimension d) noexcept;
Task judge_task(JudgeDimension d) noexcept;

struct JudgeScore {
    JudgeDimension dimension = JudgeDimension::coherence;
    int value = 0;
    std::string raw_response;
};

// First standalone integer in 1..5. Throws Error(unparseable_score).
int parse_judge(std::string_view response);

// Strict Yes/No after trimming whitespace.
enum class YesNo { yes, no, other };
YesNo parse_yes_no(std::string_view response);

struct OcrCorrection {
    std::string text;
    bool applied = false;
    std::optional<std::string> warning;
};

// Outputs deviating from the input length by more than this fraction are
// rejected as rewrites.
inline constexpr double kMaxOcrLengthDeviation = 0.5;

OcrCorrection ocr_post_correct(LlmClient& client, const PromptLibrary& prompts, std::string_view text,
                               std::string_view language = "the original language");

// ---------------------------------------------------------------------------
// Embeddings over HTTP (OpenAI-style {"input":[...]} -> {"data":[{"embedding"}]}).

class HttpEmbeddingClient {
public:
    HttpEmbeddingClient(std::string url, std::string api_key, std::string model);
    // One entry per input; nullopt on failure.
    std::vector<std::optional<std::vector<double>>> embed(std::span<const std::string> texts);

private:
    std::string origin_;
    std::string path_;
    std::string api_key_;
    std::string model_;
};

}  // namespace frontpage::llm
