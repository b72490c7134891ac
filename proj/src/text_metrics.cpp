#include "frontpage/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "frontpage/error.hpp"
#include "frontpage/unicode.hpp"

namespace frontpage::text {
namespace {

using NGram = std::string;

NGram join_ngram(std::span<const std::string> tokens, std::size_t start, int n) {
    NGram g;
    for (int k = 0; k < n; ++k) {
        if (k) g.push_back('\x1f');
        g += tokens[start + static_cast<std::size_t>(k)];
    }
    return g;
}

std::set<NGram> ngram_set(std::span<const std::string> tokens, int n) {
    std::set<NGram> out;
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= tokens.size(); ++i) out.insert(join_ngram(tokens, i, n));
    return out;
}

std::map<NGram, std::size_t> ngram_counts(std::span<const std::string> tokens, int n) {
    std::map<NGram, std::size_t> out;
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= tokens.size(); ++i) ++out[join_ngram(tokens, i, n)];
    return out;
}

std::size_t ngram_total(std::size_t tokens, int n) {
    const auto un = static_cast<std::size_t>(n);
    return tokens >= un ? tokens - un + 1 : 0;
}

void check_n(int n, int max_n) {
    if (n < 1 || n > max_n)
        throw Error(Errc::invalid_argument, "n must be in [1," + std::to_string(max_n) + "]");
}

}  // namespace

std::vector<std::string> Tokenizer::operator()(std::string_view text) const {
    std::string norm = unicode::normalize_nfc(text);
    if (lowercase) norm = unicode::to_lower(norm);
    std::vector<std::string> out;
    for (auto& piece : unicode::split_whitespace(norm)) {
        if (strip_punctuation) {
            std::string stripped = unicode::strip_punctuation(piece);
            if (!stripped.empty()) out.push_back(std::move(stripped));
        } else {
            out.push_back(std::move(piece));
        }
    }
    return out;
}

std::size_t Tokenizer::count(std::string_view text) const { return (*this)(text).size(); }

std::vector<std::string> tokenize(std::string_view text, const Tokenizer& tok) { return tok(text); }

double harmonic_mean(double precision, double recall) {
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

std::string_view to_string(LengthCategory c) noexcept {
    switch (c) {
        case LengthCategory::c0_25: return "c0_25";
        case LengthCategory::c25_50: return "c25_50";
        case LengthCategory::c50_100: return "c50_100";
        case LengthCategory::c100_plus: return "c100_plus";
    }
    return "c0_25";
}

LengthCategory length_category_from_string(std::string_view s) {
    for (auto c : kLengthCategories)
        if (to_string(c) == s) return c;
    throw Error(Errc::schema_violation, "unknown length category '" + std::string(s) + "'");
}

double novel_ngram_ratio(std::string_view summary, std::span<const std::string> sources, int n,
                         const Tokenizer& tok) {
    check_n(n, 4);
    const auto summary_tokens = tok(summary);
    if (summary_tokens.size() < static_cast<std::size_t>(n))
        throw Error(Errc::too_short, "summary has fewer than " + std::to_string(n) + " tokens");
    const auto summary_set = ngram_set(summary_tokens, n);
    std::set<NGram> source_set;
    for (const auto& src : sources) source_set.merge(ngram_set(tok(src), n));
    std::size_t novel = 0;
    for (const auto& g : summary_set)
        if (!source_set.contains(g)) ++novel;
    return static_cast<double>(novel) / static_cast<double>(summary_set.size());
}

double compression_rate(std::string_view summary, std::span<const std::string> sources,
                        const Tokenizer& tok) {
    std::size_t source_words = 0;
    for (const auto& src : sources) source_words += tok.count(src);
    if (source_words == 0) throw Error(Errc::empty_sources, "sources contain no tokens");
    const double ratio = static_cast<double>(tok.count(summary)) / static_cast<double>(source_words);
    return std::clamp(1.0 - ratio, 0.0, 1.0);
}

LengthCategory length_category_for_words(std::size_t words) noexcept {
    if (words < 25) return LengthCategory::c0_25;
    if (words < 50) return LengthCategory::c25_50;
    if (words < 100) return LengthCategory::c50_100;
    return LengthCategory::c100_plus;
}

LengthCategory length_category(std::string_view summary, const Tokenizer& tok) {
    return length_category_for_words(tok.count(summary));
}

PrecisionRecallF1 rouge_n_tokens(std::span<const std::string> reference,
                                 std::span<const std::string> candidate, int n) {
    check_n(n, 4);
    if (reference.size() < static_cast<std::size_t>(n))
        throw Error(Errc::too_short, "reference has fewer than " + std::to_string(n) + " tokens");
    const auto ref_counts = ngram_counts(reference, n);
    const auto cand_counts = ngram_counts(candidate, n);
    std::size_t overlap = 0;
    for (const auto& [g, c] : cand_counts) {
        auto it = ref_counts.find(g);
        if (it != ref_counts.end()) overlap += std::min(c, it->second);
    }
    const std::size_t ref_total = ngram_total(reference.size(), n);
    const std::size_t cand_total = ngram_total(candidate.size(), n);
    PrecisionRecallF1 s;
    s.recall = static_cast<double>(overlap) / static_cast<double>(ref_total);
    s.precision = cand_total ? static_cast<double>(overlap) / static_cast<double>(cand_total) : 0.0;
    s.f1 = harmonic_mean(s.precision, s.recall);
    return s;
}

PrecisionRecallF1 rouge_n(std::string_view reference, std::string_view candidate, int n,
                          const Tokenizer& tok) {
    const auto ref = tok(reference);
    const auto cand = tok(candidate);
    return rouge_n_tokens(ref, cand, n);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    // Two-row DP; rows live on the stack for summary-sized inputs.
    constexpr std::size_t kInline = 128;
    std::array<std::size_t, 2 * kInline> inline_rows{};
    std::vector<std::size_t> heap_rows;
    std::size_t* rows = inline_rows.data();
    const std::size_t width = b.size() + 1;
    if (width > kInline) {
        heap_rows.assign(2 * width, 0);
        rows = heap_rows.data();
    }
    std::size_t* prev = rows;
    std::size_t* cur = rows + width;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

PrecisionRecallF1 rouge_l_tokens(std::span<const std::string> reference,
                                 std::span<const std::string> candidate) {
    if (reference.empty() || candidate.empty())
        throw Error(Errc::empty_input, "rouge_l requires non-empty reference and candidate");
    const auto l = static_cast<double>(lcs_length(reference, candidate));
    PrecisionRecallF1 s;
    s.recall = l / static_cast<double>(reference.size());
    s.precision = l / static_cast<double>(candidate.size());
    s.f1 = harmonic_mean(s.precision, s.recall);
    return s;
}

PrecisionRecallF1 rouge_l(std::string_view reference, std::string_view candidate,
                          const Tokenizer& tok) {
    const auto ref = tok(reference);
    const auto cand = tok(candidate);
    return rouge_l_tokens(ref, cand);
}

MetricReport summary_metrics(std::string_view summary, std::span<const std::string> sources,
                             const Tokenizer& tok) {
    MetricReport r;
    const auto summary_tokens = tok(summary);
    r.summary_words = summary_tokens.size();
    for (const auto& src : sources) r.source_words += tok.count(src);
    if (r.source_words == 0) throw Error(Errc::empty_sources, "sources contain no tokens");
    r.compression = std::clamp(
        1.0 - static_cast<double>(r.summary_words) / static_cast<double>(r.source_words), 0.0, 1.0);
    r.length_category = length_category_for_words(r.summary_words);
    for (int n = 1; n <= 4; ++n) {
        r.novel_ngram[static_cast<std::size_t>(n - 1)] =
            summary_tokens.size() >= static_cast<std::size_t>(n)
                ? novel_ngram_ratio(summary, sources, n, tok)
                : std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

nlohmann::json to_json(const PrecisionRecallF1& s) {
    return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json novel = nlohmann::json::object();
    for (int n = 1; n <= 4; ++n) {
        const double v = r.novel_ngram[static_cast<std::size_t>(n - 1)];
        novel[std::to_string(n)] = std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
    }
    return {{"novel_ngram", novel},
            {"compression", r.compression},
            {"summary_words", r.summary_words},
            {"source_words", r.source_words},
            {"length_category", to_string(r.length_category)}};
}

}  // namespace frontpage::text
