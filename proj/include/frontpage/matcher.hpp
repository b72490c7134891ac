#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "frontpage/corpus.hpp"
#include "frontpage/error.hpp"
#include "frontpage/llm_client.hpp"
#include "frontpage/teaser_detect.hpp"
#include "frontpage/text_metrics.hpp"

namespace frontpage::match {

enum class Decision { match, no_match, undecided };
enum class Backend { tfidf, embedding, zero_shot };

std::string_view to_string(Decision d) noexcept;
std::string_view to_string(Backend b) noexcept;
Decision decision_from_string(std::string_view s);
Backend backend_from_string(std::string_view s);

struct CandidatePair {
    std::string teaser_id;
    std::string article_id;
    std::optional<double> score;
    Decision decision = Decision::undecided;
    Backend backend = Backend::tfidf;
};

nlohmann::json to_json(const CandidatePair& p);
CandidatePair pair_from_json(const nlohmann::json& j);

// One undecided pair per (teaser, article) where the article lies on a page the
// teaser references, within the same issue. Teaser order, then article order.
std::vector<CandidatePair> build_candidates(std::span<const detect::Teaser> teasers,
                                            std::span<const corpus::Article> articles);

// ---------------------------------------------------------------------------
// TF-IDF

using Document = std::vector<std::string>;  // tokens

// Sparse weight vector sorted by term index.
using SparseVector = std::vector<std::pair<std::size_t, double>>;

class TfIdfModel {
public:
    // Smoothed idf: ln(N / df) + 1. Throws Error(empty_corpus).
    static TfIdfModel fit(std::span<const Document> corpus);

    std::size_t doc_count() const { return doc_count_; }
    std::size_t vocabulary_size() const { return idf_.size(); }
    std::optional<std::size_t> index_of(std::string_view term) const;
    // Throws std::out_of_range for unindexed terms.
    double idf(std::string_view term) const;

    // tf = count / document length; unindexed terms carry no weight.
    SparseVector vectorize(std::span<const std::string> doc) const;

private:
    std::unordered_map<std::string, std::size_t> vocabulary_;
    std::vector<double> idf_;
    std::size_t doc_count_ = 0;
};

double cosine(const SparseVector& a, const SparseVector& b);
double cosine(std::span<const double> a, std::span<const double> b);

// Cosine of the two TF-IDF vectors, in [0,1]; 0 when either is all-zero.
double cosine_score(const TfIdfModel& model, std::span<const std::string> a, std::span<const std::string> b);

// Text lookups used by every backend.
struct TextIndex {
    std::unordered_map<std::string, std::string> teasers;   // id -> text
    std::unordered_map<std::string, std::string> articles;  // id -> full text

    static TextIndex build(std::span<const detect::Teaser> teasers, std::span<const corpus::Article> articles);
    const std::string& teaser(const std::string& id) const;
    const std::string& article(const std::string& id) const;
};

// Fits over every teaser and article text (the whole corpus).
TfIdfModel fit_corpus_model(std::span<const detect::Teaser> teasers, std::span<const corpus::Article> articles,
                            const text::Tokenizer& tok = {});

std::vector<CandidatePair> decide_tfidf(std::span<const CandidatePair> pairs, const TfIdfModel& model,
                                        const TextIndex& texts, double threshold, const text::Tokenizer& tok = {});

// Re-applies the decision rule to already-scored pairs.
std::vector<CandidatePair> apply_threshold(std::span<const CandidatePair> pairs, double threshold);

// ---------------------------------------------------------------------------
// Calibration

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t total() const { return tp + fp + fn + tn; }
    double precision() const;
    double recall() const;
    double f1() const;
    double accuracy() const;
};

struct CalibrationResult {
    double threshold = 0.0;
    double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
    std::size_t support = 0;
    ConfusionCounts counts;
};

struct ScoredLabel {
    double score = 0.0;
    bool label = false;
};

// Sweeps every observed score as a threshold (match iff score >= t) and keeps
// the max-F1 one, ties to the smallest t. Throws Error(degenerate_labels).
CalibrationResult calibrate_threshold(std::span<const ScoredLabel> scored);

nlohmann::json to_json(const CalibrationResult& r);

// ---------------------------------------------------------------------------
// Embedding backend

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    // One vector per text, nullopt for a failed text. May throw
    // Error(provider_unavailable) when the provider cannot be reached at all.
    virtual std::vector<std::optional<std::vector<double>>> embed(std::span<const std::string> texts) = 0;
};

// Precomputed vectors from a JSONL file of {"text": ..., "vector": [...]} or
// {"text_sha256": ..., "vector": [...]} records.
class FileEmbeddingProvider : public EmbeddingProvider {
public:
    explicit FileEmbeddingProvider(const std::filesystem::path& path);
    std::vector<std::optional<std::vector<double>>> embed(std::span<const std::string> texts) override;
    std::size_t size() const { return vectors_.size(); }

private:
    std::unordered_map<std::string, std::vector<double>> vectors_;  // keyed by sha256 of NFC text
};

// Adapter over the llm module's HTTP embedding client.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string url, std::string api_key, std::string model);
    std::vector<std::optional<std::vector<double>>> embed(std::span<const std::string> texts) override;

private:
    llm::HttpEmbeddingClient client_;
};

struct DecideOutcome {
    std::vector<CandidatePair> pairs;
    std::size_t failures = 0;
    std::vector<std::string> errors;  // one line per failed pair
    // Set when every call failed (provider-unavailable / endpoint-unavailable).
    std::optional<Errc> fatal;
};

DecideOutcome decide_embedding(std::span<const CandidatePair> pairs, EmbeddingProvider& provider,
                               const TextIndex& texts, double threshold);

// ---------------------------------------------------------------------------
// Zero-shot backend

DecideOutcome decide_zero_shot(std::span<const CandidatePair> pairs, llm::LlmClient& client,
                               const llm::PromptLibrary& prompts, const TextIndex& texts);

std::string match_prompt(const llm::PromptLibrary& prompts, std::string_view article, std::string_view teaser);

// ---------------------------------------------------------------------------
// Evaluation

struct GoldPair {
    std::string teaser_id;
    std::string article_id;
    bool label = false;
};

// Accepts pair records {teaser_id, article_id, label} and annotation-export
// records {item_id: "<teaser>::<article>", task: "match_binary", value}. For
// repeated items the first record wins.
std::vector<GoldPair> gold_from_json(std::span<const nlohmann::json> records);
std::vector<GoldPair> load_gold(const std::filesystem::path& path);

std::string pair_item_id(std::string_view teaser_id, std::string_view article_id);

struct MatchingReport {
    double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
    ConfusionCounts counts;
    std::size_t undecided = 0;
};

// Undecided counts as no_match. Throws Error(coverage_gap).
MatchingReport evaluate_matching(std::span<const CandidatePair> decided, std::span<const GoldPair> gold);

// (score, label) for every scored pair present in gold.
std::vector<ScoredLabel> join_scores(std::span<const CandidatePair> pairs, std::span<const GoldPair> gold);

nlohmann::json to_json(const MatchingReport& r);
std::string format_table(const std::vector<std::pair<std::string, MatchingReport>>& rows);

}  // namespace frontpage::match
