#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace frontpage::text {

// Shared tokenizer. NFC-normalizes, splits on Unicode whitespace, then
// optionally strips leading/trailing punctuation and lowercases (a no-op for
// uncased scripts). Tokens are never empty.
struct Tokenizer {
    std::string language = "und";
    bool lowercase = true;
    bool strip_punctuation = true;

    std::vector<std::string> operator()(std::string_view text) const;
    std::size_t count(std::string_view text) const;
};

std::vector<std::string> tokenize(std::string_view text, const Tokenizer& tok = {});

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Harmonic mean; 0 when both inputs are 0.
double harmonic_mean(double precision, double recall);

enum class LengthCategory { c0_25, c25_50, c50_100, c100_plus };

std::string_view to_string(LengthCategory c) noexcept;
LengthCategory length_category_from_string(std::string_view s);
inline constexpr std::array<LengthCategory, 4> kLengthCategories{
    LengthCategory::c0_25, LengthCategory::c25_50, LengthCategory::c50_100, LengthCategory::c100_plus};

// Fraction of distinct summary n-grams absent from every source (n-gram sets
// of the sources are unioned; no n-gram spans two sources).
// Throws too_short when the summary has fewer than n tokens.
double novel_ngram_ratio(std::string_view summary, std::span<const std::string> sources, int n,
                         const Tokenizer& tok = {});

// 1 - summary_words / source_words, clamped to [0,1]. Throws empty_sources.
double compression_rate(std::string_view summary, std::span<const std::string> sources,
                        const Tokenizer& tok = {});

LengthCategory length_category(std::string_view summary, const Tokenizer& tok = {});
LengthCategory length_category_for_words(std::size_t words) noexcept;

// Clipped n-gram overlap. Throws too_short when the reference has < n tokens.
PrecisionRecallF1 rouge_n(std::string_view reference, std::string_view candidate, int n,
                          const Tokenizer& tok = {});
PrecisionRecallF1 rouge_n_tokens(std::span<const std::string> reference,
                                 std::span<const std::string> candidate, int n);

// LCS-based. Throws empty_input when either side has no tokens.
PrecisionRecallF1 rouge_l(std::string_view reference, std::string_view candidate,
                          const Tokenizer& tok = {});
PrecisionRecallF1 rouge_l_tokens(std::span<const std::string> reference,
                                 std::span<const std::string> candidate);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct RougeScores {
    PrecisionRecallF1 rouge1;
    PrecisionRecallF1 rouge2;
    PrecisionRecallF1 rougeL;
};

// Per-sample statistics of a (summary, sources) pair. Novel n-gram entries are
// absent (NaN) for n larger than the summary's token count.
struct MetricReport {
    std::array<double, 4> novel_ngram{};  // index n-1
    double compression = 0.0;
    std::size_t summary_words = 0;
    std::size_t source_words = 0;
    LengthCategory length_category = LengthCategory::c0_25;
};

MetricReport summary_metrics(std::string_view summary, std::span<const std::string> sources,
                             const Tokenizer& tok = {});

nlohmann::json to_json(const PrecisionRecallF1& s);
nlohmann::json to_json(const MetricReport& r);

}  // namespace frontpage::text
