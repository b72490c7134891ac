#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "frontpage/corpus.hpp"

namespace frontpage::detect {

enum class MarkerPosition { before_number, after_number };
enum class PhrasePosition { anywhere, end };

// How numerals next to a key phrase are read.
struct PageRefGrammar {
    MarkerPosition marker_position = MarkerPosition::before_number;
    std::string range_separators = "-–—";  // hyphen, en dash, em dash
    std::string list_separators = ",;/&+";
    int window_tokens = 3;
    int max_page = 999;
};

struct LanguageProfile {
    std::string language;
    std::string title_id;
    std::vector<std::string> key_phrases;
    std::vector<std::string> continuation_phrases;
    PageRefGrammar page_ref_grammar;
    std::size_t min_words = 10;
    bool front_page_only = true;
    PhrasePosition key_phrase_position = PhrasePosition::anywhere;
    text::Tokenizer tokenizer;

    // Throws schema_violation on broken invariants (empty key phrases, overlap
    // between key and continuation phrases after normalization).
    void validate() const;
};

LanguageProfile profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LanguageProfile& p);
LanguageProfile load_profile(const std::filesystem::path& path);

struct Teaser {
    std::string id;
    corpus::IssueRef issue_ref;
    std::string text;
    std::size_t word_count = 0;
    std::set<int> page_refs;
    // Headline (when merged) first, key-phrase block last.
    std::vector<std::string> source_block_ids;

    const std::string& anchor_block_id() const { return source_block_ids.back(); }
};

nlohmann::json to_json(const Teaser& t);
Teaser teaser_from_json(const nlohmann::json& j);

// Page numbers adjacent to any key phrase in `text`. Ranges expand inclusively;
// descending ranges, 0 and numbers beyond max_page are dropped.
// Throws Error(no_reference) when nothing parses.
std::set<int> parse_page_refs(std::string_view text, std::span<const std::string> key_phrases,
                              const PageRefGrammar& grammar, PhrasePosition position = PhrasePosition::anywhere);

// True when `phrase` occurs in `text` (both normalized+folded) at a left word
// boundary. Exposed for tests.
bool contains_phrase(std::string_view text, std::string_view phrase);

std::vector<Teaser> detect_teasers(const corpus::Issue& issue, const LanguageProfile& profile);

// Gold label for one front-page block.
struct GoldBlockLabel {
    corpus::IssueRef issue_ref;
    std::string block_id;
    bool is_teaser = false;
    std::string cause;  // expected failure tag, e.g. "segmentation", "ocr-noise", "length/header"
};

std::vector<GoldBlockLabel> load_detection_gold(const std::filesystem::path& path);
GoldBlockLabel gold_label_from_json(const nlohmann::json& j);

struct ErrorCause {
    std::size_t false_negatives = 0;
    std::size_t false_positives = 0;
};

struct DetectionReport {
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::map<std::string, ErrorCause> error_breakdown;

    // Share of all errors attributed to `cause`.
    double error_share(const std::string& cause) const;
};

DetectionReport evaluate_detection(std::span<const Teaser> predicted, std::span<const GoldBlockLabel> gold);

nlohmann::json to_json(const DetectionReport& r);
std::string format_table(const DetectionReport& r);

}  // namespace frontpage::detect
