#include "frontpage/llm_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"
#include "frontpage/unicode.hpp"

namespace frontpage::llm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Prompts

std::string_view to_string(Task t) noexcept {
    switch (t) {
        case Task::match: return "match";
        case Task::summarize: return "summarize";
        case Task::judge_coherence: return "judge_coherence";
        case Task::judge_consistency: return "judge_consistency";
        case Task::judge_coverage: return "judge_coverage";
        case Task::ocr_fix: return "ocr_fix";
    }
    return "match";
}

Task task_from_string(std::string_view s) {
    for (Task t : {Task::match, Task::summarize, Task::judge_coherence, Task::judge_consistency,
                   Task::judge_coverage, Task::ocr_fix})
        if (to_string(t) == s) return t;
    throw Error(Errc::invalid_argument, "unknown prompt task '" + std::string(s) + "'");
}

namespace {

bool is_slot_char(char c) { return (c >= 'a' && c <= 'z') || c == '_' || (c >= '0' && c <= '9'); }

// Calls on_text for literal runs and on_slot for `{name}` occurrences.
template <typename OnText, typename OnSlot>
void scan_template(std::string_view text, OnText on_text, OnSlot on_slot) {
    std::size_t i = 0;
    std::size_t literal_start = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_slot_char(text[j])) ++j;
            if (j < text.size() && text[j] == '}' && j > i + 1) {
                on_text(text.substr(literal_start, i - literal_start));
                on_slot(text.substr(i + 1, j - i - 1));
                i = j + 1;
                literal_start = i;
                continue;
            }
        }
        ++i;
    }
    on_text(text.substr(literal_start));
}

const char* kMatchPrompt =
    "Given the following text and summary, answer with 'Yes' if the text relates to the summary, and 'No' if it "
    "does not. Do not provide explanations. Only output 'Yes' or 'No'.\n"
    "\n"
    "Text: {article}\n"
    "\n"
    "Summary: {teaser}";

const char* kSummarizePrompt =
    "Please summarize the following text in {language}:\n"
    "\n"
    "Text: {text}\n";

const char* kCoherencePrompt =
    "Score the following news summarization given the corresponding news with respect to coherence with one to "
    "five stars, where one star means “incoherence” and five stars means “perfect coherence”. "
    "Note that coherence measures the quality of all sentences collectively, to the fit together and sound "
    "naturally. Consider the quality of the summary as a whole.\n"
    "\n"
    "News: {article}\n"
    "\n"
    "Summary: {summary}\n"
    "\n"
    "Evaluation Form (scores ONLY): - Coherence (1-5):";

const char* kConsistencyPrompt =
    "Score the following news summarization given the corresponding news with respect to consistency with one to "
    "five stars, where one star means “inconsistency” and five stars means “perfect consistency”. "
    "Note that consistency measures whether the facts in the summary are consistent with the facts in the original "
    "article. Consider whether the summary does reproduce all facts accurately and does not make up untrue "
    "information.\n"
    "\n"
    "News: {article}\n"
    "\n"
    "Summary: {summary}\n"
    "\n"
    "Evaluation Form (scores ONLY): - Consistency (1-5):";

const char* kCoveragePrompt =
    "You will receive a reference summary and a candidate summary. Your task is to compare these two summaries and "
    "assess the extent to which the candidate summary covers the information presented in the reference summary.\n"
    "\n"
    "Please indicate your agreement with the following statement: “All of the information in the reference "
    "summary can be found in the candidate summary.”\n"
    "\n"
    "Use the following 5-point scale when determining your response:\n"
    "\n"
    "1. Strongly Disagree\n"
    "\n"
    "2. Disagree\n"
    "\n"
    "3. Neither Agree nor Disagree\n"
    "\n"
    "4. Agree\n"
    "\n"
    "5. Strongly Agree\n"
    "\n"
    "Reference Summary:{reference}\n"
    "\n"
    "Candidate Summary: {candidate}\n"
    "\n"
    "Evaluation Form (scores ONLY): - Agreement (1-5):";

const char* kOcrFixPrompt =
    "The following text was produced by OCR from a printed newspaper in {language} and may contain recognition "
    "errors. Correct only the recognition errors without rewording, shortening or translating. Output only the "
    "corrected text.\n"
    "\n"
    "Text: {text}";

}  // namespace

std::vector<std::string> PromptTemplate::slots() const {
    std::vector<std::string> out;
    scan_template(text, [](std::string_view) {}, [&](std::string_view name) {
        if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
    });
    return out;
}

std::string PromptTemplate::render(const SlotMap& values) const {
    std::string out;
    scan_template(text, [&](std::string_view lit) { out += lit; }, [&](std::string_view name) {
        auto it = values.find(name);
        if (it == values.end())
            throw Error(Errc::missing_slot,
                        "prompt '" + std::string(to_string(task)) + "' is missing slot '" + std::string(name) + "'");
        out += it->second;
    });
    return out;
}

PromptLibrary PromptLibrary::defaults() {
    PromptLibrary lib;
    lib.set_template({Task::match, kMatchPrompt});
    lib.set_template({Task::summarize, kSummarizePrompt});
    lib.set_template({Task::judge_coherence, kCoherencePrompt});
    lib.set_template({Task::judge_consistency, kConsistencyPrompt});
    lib.set_template({Task::judge_coverage, kCoveragePrompt});
    lib.set_template({Task::ocr_fix, kOcrFixPrompt});
    return lib;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    PromptLibrary lib = defaults();
    for (Task t : {Task::match, Task::summarize, Task::judge_coherence, Task::judge_consistency,
                   Task::judge_coverage, Task::ocr_fix}) {
        const auto tmpl = dir / (std::string(to_string(t)) + ".txt");
        if (std::filesystem::exists(tmpl)) {
            std::string text = jsonl::read_text(tmpl);
            while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
            lib.set_template({t, std::move(text)});
        }
        const auto shots = dir / (std::string(to_string(t)) + ".fewshot.jsonl");
        if (std::filesystem::exists(shots)) {
            std::vector<Exemplar> ex;
            for (const auto& j : jsonl::read(shots)) {
                Exemplar e;
                for (const auto& [k, v] : j.at("slots").items()) e.slots[k] = v.get<std::string>();
                e.answer = j.at("answer").get<std::string>();
                ex.push_back(std::move(e));
            }
            lib.set_exemplars(t, std::move(ex));
        }
    }
    return lib;
}

const PromptTemplate& PromptLibrary::get(Task task) const { return templates_.at(task); }

const std::vector<Exemplar>& PromptLibrary::exemplars(Task task) const {
    static const std::vector<Exemplar> none;
    auto it = exemplars_.find(task);
    return it == exemplars_.end() ? none : it->second;
}

void PromptLibrary::set_template(PromptTemplate t) { templates_[t.task] = std::move(t); }

void PromptLibrary::set_exemplars(Task task, std::vector<Exemplar> ex) { exemplars_[task] = std::move(ex); }

std::string PromptLibrary::render(Task task, const SlotMap& slots, std::size_t shots) const {
    const auto& tmpl = get(task);
    std::string out;
    if (shots > 0) {
        const auto& ex = exemplars(task);
        if (ex.size() < shots)
            throw Error(Errc::invalid_argument, std::to_string(shots) + "-shot prompt for '" +
                                                    std::string(to_string(task)) + "' needs " + std::to_string(shots) +
                                                    " exemplars, have " + std::to_string(ex.size()));
        for (std::size_t i = 0; i < shots; ++i) {
            out += tmpl.render(ex[i].slots);
            out += "\n";
            out += ex[i].answer;
            out += "\n\n";
        }
    }
    out += tmpl.render(slots);
    return out;
}

std::string render_prompt(Task task, const SlotMap& slots) {
    static const PromptLibrary lib = PromptLibrary::defaults();
    return lib.render(task, slots);
}

// ---------------------------------------------------------------------------
// Replay cache

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

ReplayCache::ReplayCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(*path_)) return;
    for (const auto& j : jsonl::read(*path_)) {
        if (!j.contains("prompt") || !j.contains("response"))
            throw Error(Errc::malformed_document, path_->string() + ": cache entry without prompt/response");
        const std::string key = j.contains("key") ? j["key"].get<std::string>()
                                                  : sha256_hex(j["prompt"].get<std::string>());
        entries_.emplace(key, j["response"].get<std::string>());
    }
}

json ReplayCache::make_entry(std::string_view prompt, std::string_view response, const CompletionParams& params,
                             std::string_view model) {
    return {{"key", sha256_hex(prompt)},
            {"model", std::string(model)},
            {"params", {{"temperature", params.temperature}, {"max_tokens", params.max_tokens}}},
            {"prompt", std::string(prompt)},
            {"response", std::string(response)}};
}

std::optional<std::string> ReplayCache::lookup(std::string_view prompt) const {
    const std::string key = sha256_hex(prompt);
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ReplayCache::store(std::string_view prompt, std::string_view response, const CompletionParams& params,
                        std::string_view model) {
    const std::string key = sha256_hex(prompt);
    std::lock_guard lock(mutex_);
    if (!entries_.emplace(key, std::string(response)).second) return;
    if (!path_) return;
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    if (!out) throw Error(Errc::io_error, "cannot append to replay cache " + path_->string());
    out << make_entry(prompt, response, params, model).dump() << '\n';
    out.flush();
}

std::size_t ReplayCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// Transport

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw Error(Errc::invalid_argument, "invalid endpoint URL '" + url + "'");
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

TransportResult post_json(const std::string& origin, const std::string& path, const std::string& api_key,
                          const json& body, std::chrono::milliseconds timeout) {
    TransportResult r;
    httplib::Client cli(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
    cli.set_connection_timeout(static_cast<time_t>(std::max<long long>(secs, 1)), 0);
    cli.set_read_timeout(static_cast<time_t>(std::max<long long>(secs, 1)), 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        r.status = TransportResult::Status::unavailable;
        r.detail = httplib::to_string(res.error());
        return r;
    }
    r.http_status = res->status;
    r.text = res->body;
    if (res->status == 429)
        r.status = TransportResult::Status::rate_limited;
    else if (res->status >= 500)
        r.status = TransportResult::Status::unavailable;
    else if (res->status != 200)
        r.status = TransportResult::Status::failed;
    if (r.status != TransportResult::Status::ok) r.detail = "HTTP " + std::to_string(res->status);
    return r;
}

}  // namespace

HttpChatTransport::HttpChatTransport(std::string url, std::string api_key, std::chrono::milliseconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
    std::tie(origin_, path_) = split_url(url);
}

TransportResult HttpChatTransport::send(const ChatRequest& request) {
    json body = {{"model", request.model},
                 {"temperature", request.params.temperature},
                 {"max_tokens", request.params.max_tokens},
                 {"messages",
                  json::array({{{"role", "system"}, {"content", request.system}},
                               {{"role", "user"}, {"content", request.user}}})}};
    TransportResult r = post_json(origin_, path_, api_key_, body, timeout_);
    if (r.status != TransportResult::Status::ok) return r;
    try {
        const auto j = json::parse(r.text);
        r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        r.status = TransportResult::Status::failed;
        r.detail = std::string("unexpected chat-completion response: ") + e.what();
    }
    return r;
}

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
    auto d = base_delay;
    for (int i = 1; i < attempt && d < max_delay; ++i) d *= 2;
    return std::min(d, max_delay);
}

std::optional<EndpointSettings> endpoint_from_env() {
    const char* url = std::getenv("FRONTPAGE_LLM_ENDPOINT");
    if (!url || !*url) return std::nullopt;
    EndpointSettings s;
    s.url = url;
    if (const char* key = std::getenv("FRONTPAGE_LLM_API_KEY")) s.api_key = key;
    if (const char* model = std::getenv("FRONTPAGE_LLM_MODEL")) s.model = model;
    return s;
}

LlmClient::LlmClient(ClientConfig config, std::shared_ptr<ReplayCache> cache, std::unique_ptr<ChatTransport> transport)
    : config_(std::move(config)),
      cache_(cache ? std::move(cache) : std::make_shared<ReplayCache>()),
      transport_(std::move(transport)),
      sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

std::unique_ptr<LlmClient> LlmClient::from_environment(std::optional<std::filesystem::path> cache_path, ClientConfig config) {
    auto cache = cache_path ? std::make_shared<ReplayCache>(*cache_path) : std::make_shared<ReplayCache>();
    std::unique_ptr<ChatTransport> transport;
    if (auto env = endpoint_from_env()) {
        transport = std::make_unique<HttpChatTransport>(env->url, env->api_key);
        if (!env->model.empty()) config.model = env->model;
    }
    return std::make_unique<LlmClient>(std::move(config), std::move(cache), std::move(transport));
}

std::string LlmClient::complete(std::string_view prompt, const CompletionParams& params) {
    if (auto hit = cache_->lookup(prompt)) return *hit;
    if (!transport_)
        throw Error(Errc::endpoint_unavailable, "no LLM endpoint configured and prompt not in replay cache");

    ChatRequest req{config_.model, config_.system_prompt, std::string(prompt), params};
    TransportResult last;
    const int attempts = std::max(config_.retry.max_attempts, 1);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        ++network_calls_;
        last = transport_->send(req);
        if (last.status == TransportResult::Status::ok) {
            cache_->store(prompt, last.text, params, config_.model);
            return last.text;
        }
        if (last.status == TransportResult::Status::failed) break;
        if (attempt < attempts) sleep_(config_.retry.delay_for(attempt));
    }
    if (last.status == TransportResult::Status::rate_limited)
        throw Error(Errc::rate_limited, "LLM endpoint rate-limited after retries: " + last.detail);
    throw Error(Errc::endpoint_unavailable, "LLM endpoint unavailable: " + last.detail);
}

std::vector<LlmClient::BatchResult> LlmClient::complete_batch(std::span<const std::string> prompts,
                                                              const CompletionParams& params) {
    std::vector<BatchResult> results(prompts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < prompts.size(); i = next++) {
            try {
                results[i].text = complete(prompts[i], params);
            } catch (const Error& e) {
                results[i].error = e.what();
                results[i].error_code = static_cast<int>(e.code());
            } catch (const std::exception& e) {
                results[i].error = e.what();
            }
        }
    };
    const std::size_t width = std::clamp<std::size_t>(config_.concurrency, 1, std::max<std::size_t>(prompts.size(), 1));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < width; ++w) pool.emplace_back(worker);
        worker();
    }
    return results;
}

// ---------------------------------------------------------------------------
// Response handling

std::string_view to_string(JudgeDimension d) noexcept {
    switch (d) {
        case JudgeDimension::coherence: return "coherence";
        case JudgeDimension::consistency: return "consistency";
        case JudgeDimension::coverage: return "coverage";
    }
    return "coherence";
}

Task judge_task(JudgeDimension d) noexcept {
    switch (d) {
        case JudgeDimension::coherence: return Task::judge_coherence;
        case JudgeDimension::consistency: return Task::judge_consistency;
        case JudgeDimension::coverage: return Task::judge_coverage;
    }
    return Task::judge_coherence;
}

int parse_judge(std::string_view response) {
    auto digit = [](char c) { return c >= '0' && c <= '9'; };
    const std::size_t n = response.size();
    for (std::size_t i = 0; i < n;) {
        if (!digit(response[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && digit(response[j])) ++j;
        const bool letter_before = i > 0 && std::isalpha(static_cast<unsigned char>(response[i - 1]));
        const bool letter_after = j < n && std::isalpha(static_cast<unsigned char>(response[j]));
        const bool decimal = (i >= 2 && response[i - 1] == '.' && digit(response[i - 2])) ||
                             (j + 1 < n && response[j] == '.' && digit(response[j + 1]));
        const bool range = (i >= 2 && response[i - 1] == '-' && digit(response[i - 2])) ||
                           (j + 1 < n && response[j] == '-' && digit(response[j + 1]));
        if (!letter_before && !letter_after && !decimal && !range && j - i == 1) {
            const int v = response[i] - '0';
            if (v >= 1 && v <= 5) return v;
        }
        i = j;
    }
    throw Error(Errc::unparseable_score, "no score 1-5 in response '" + std::string(response.substr(0, 80)) + "'");
}

YesNo parse_yes_no(std::string_view response) {
    const std::string trimmed = unicode::collapse_whitespace(response);
    if (trimmed == "Yes") return YesNo::yes;
    if (trimmed == "No") return YesNo::no;
    return YesNo::other;
}

OcrCorrection ocr_post_correct(LlmClient& client, const PromptLibrary& prompts, std::string_view text,
                               std::string_view language) {
    OcrCorrection out;
    out.text = std::string(text);
    std::string response;
    try {
        response = client.complete(prompts.render(Task::ocr_fix, {{"text", std::string(text)},
                                                                  {"language", std::string(language)}}));
    } catch (const Error& e) {
        out.warning = std::string("OCR correction skipped: ") + e.what();
        return out;
    }
    while (!response.empty() && (response.back() == '\n' || response.back() == ' ')) response.pop_back();
    const auto in_len = static_cast<double>(unicode::code_point_count(text));
    const auto out_len = static_cast<double>(unicode::code_point_count(response));
    if (response.empty() || std::abs(out_len - in_len) > kMaxOcrLengthDeviation * in_len) {
        out.warning = "OCR correction rejected: output length " + std::to_string(static_cast<long>(out_len)) +
                      " deviates from input length " + std::to_string(static_cast<long>(in_len)) + " by more than 50%";
        return out;
    }
    out.text = std::move(response);
    out.applied = out.text != text;
    return out;
}

// ---------------------------------------------------------------------------
// Embeddings

HttpEmbeddingClient::HttpEmbeddingClient(std::string url, std::string api_key, std::string model)
    : api_key_(std::move(api_key)), model_(std::move(model)) {
    std::tie(origin_, path_) = split_url(url);
}

std::vector<std::optional<std::vector<double>>> HttpEmbeddingClient::embed(std::span<const std::string> texts) {
    std::vector<std::optional<std::vector<double>>> out(texts.size());
    if (texts.empty()) return out;
    json body = {{"model", model_}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const TransportResult r = post_json(origin_, path_, api_key_, body, std::chrono::seconds(60));
    if (r.status != TransportResult::Status::ok) return out;
    try {
        const auto j = json::parse(r.text);
        const auto& data = j.at("data");
        for (std::size_t i = 0; i < data.size() && i < texts.size(); ++i) {
            const std::size_t idx = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
            if (idx < out.size()) out[idx] = data[i].at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception&) {
        std::fill(out.begin(), out.end(), std::nullopt);
    }
    return out;
}

}  // namespace frontpage::llm
