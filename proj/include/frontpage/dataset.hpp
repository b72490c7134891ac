#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "frontpage/corpus.hpp"
#include "frontpage/llm_client.hpp"
#include "frontpage/matcher.hpp"
#include "frontpage/teaser_detect.hpp"
#include "frontpage/text_metrics.hpp"

namespace frontpage::dataset {

enum class Shape { paragraph, one_sentence, highlights };

std::string_view to_string(Shape s) noexcept;
Shape shape_from_string(std::string_view s);

inline constexpr Shape kShapes[] = {Shape::paragraph, Shape::one_sentence, Shape::highlights};

struct Sample {
    std::string id;
    std::string summary;
    std::vector<std::string> documents;
    std::vector<std::string> document_ids;
    bool is_multi_doc = false;
    text::LengthCategory length_category = text::LengthCategory::c0_25;
    Shape shape = Shape::paragraph;
    corpus::IssueRef issue_ref;
    std::string language;

    bool operator==(const Sample&) const = default;
};

nlohmann::json to_json(const Sample& s);
nlohmann::json to_manifest_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);

struct DropReport {
    std::vector<std::string> teasers_without_match;
    std::size_t undecided_pairs = 0;
};

struct Assembly {
    std::vector<Sample> samples;
    DropReport dropped;
};

// One sample per teaser with at least one `match` decision; documents ordered
// by (first page, reading order). Throws Error(dangling_reference).
Assembly assemble(std::span<const detect::Teaser> teasers, std::span<const corpus::Article> articles,
                  std::span<const match::CandidatePair> decisions,
                  const std::map<std::string, std::string>& language_by_title = {},
                  const text::Tokenizer& tok = {});

// highlights: >= 2 non-empty lines or >= 2 bullet markers;
// one_sentence: exactly one sentence when split on . ! ? followed by space/end;
// otherwise paragraph.
Shape classify_shape(std::string_view summary);

// Number of sentences under the same split rule.
std::size_t count_sentences(std::string_view text);

struct SplitStats {
    std::size_t count = 0;
    double avg_text_words = 0.0;
    double avg_summary_words = 0.0;
};

struct Datacard {
    std::vector<std::string> languages;
    std::map<Shape, std::size_t> shape_counts;
    std::map<text::LengthCategory, std::size_t> length_counts;
    std::string domain = "News";
    std::size_t size = 0;
    std::array<double, 4> novel_ngram{};  // mean over samples long enough for n
    double compression = 0.0;
    SplitStats single_doc;
    SplitStats multi_doc;
    double multi_doc_fraction = 0.0;
    double avg_cluster_size = 0.0;  // over multi-doc samples
};

// Throws Error(empty_dataset).
Datacard build_datacard(std::span<const Sample> samples, const text::Tokenizer& tok = {});

nlohmann::json to_json(const Datacard& d);
std::string format_datacard(const Datacard& d);

// Corpus table with one row per language: compression, novel 1-4-grams,
// %multi-doc.
std::string format_corpus_table(std::span<const Sample> samples, const text::Tokenizer& tok = {});
nlohmann::json corpus_table_json(std::span<const Sample> samples, const text::Tokenizer& tok = {});

struct ExportOptions {
    bool manifest_only = false;
    bool with_ocr_fix = false;
};

struct ExportResult {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
};

// Writes samples.jsonl (unless manifest_only), manifest.jsonl and, with
// with_ocr_fix, samples.corrected.jsonl into `dir`.
ExportResult export_samples(std::span<const Sample> samples, const std::filesystem::path& dir,
                            const ExportOptions& options, llm::LlmClient* client = nullptr,
                            const llm::PromptLibrary* prompts = nullptr);

std::vector<Sample> import_samples(const std::filesystem::path& path);

}  // namespace frontpage::dataset
