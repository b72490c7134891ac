#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "frontpage/text_metrics.hpp"

namespace frontpage::corpus {

struct IssueRef {
    std::string title_id;
    std::string date;  // ISO-8601 calendar date

    auto operator<=>(const IssueRef&) const = default;
    std::string key() const { return title_id + "/" + date; }
};

enum class BlockKind { headline, body, caption, other };

std::string_view to_string(BlockKind k) noexcept;
std::optional<BlockKind> block_kind_from_string(std::string_view s) noexcept;

struct Block {
    std::string id;
    BlockKind kind = BlockKind::body;
    std::string text;  // NFC
    std::uint32_t order = 0;
};

struct Page {
    int number = 0;
    std::vector<Block> blocks;  // reading order
};

// Article grouping carried by the source file, kept so serialization
// round-trips.
struct ArticleSpec {
    std::string id;
    std::vector<int> page_numbers;
    std::optional<std::string> headline_block;
    std::vector<std::string> body_blocks;
};

struct Issue {
    std::string title_id;
    std::string date;
    std::string language;
    std::vector<Page> pages;
    std::optional<std::vector<ArticleSpec>> articles;

    IssueRef ref() const { return {title_id, date}; }
    const Page* find_page(int number) const;
    const Block* find_block(std::string_view id) const;
    std::size_t block_count() const;
};

struct Article {
    std::string id;
    IssueRef issue_ref;
    std::set<int> page_numbers;
    std::optional<std::string> headline;
    std::string body;
    std::size_t word_count = 0;
    // Position of the first block, for (page, reading order) sorting.
    int first_page = 0;
    std::uint32_t first_order = 0;
    std::vector<std::string> block_ids;

    // Headline and body joined by a newline; what matchers and datasets see.
    std::string full_text() const;
};

struct IngestResult {
    Issue issue;
    std::vector<std::string> warnings;
};

// Parses and validates a canonical issue file. In strict mode any schema
// violation throws; otherwise offending blocks are dropped and reported.
// Malformed JSON and duplicate page numbers always throw.
IngestResult ingest_issue(const std::filesystem::path& path, bool strict);
IngestResult ingest_issue_json(const nlohmann::json& doc, bool strict, std::string_view origin = "<memory>");

nlohmann::json serialize_issue(const Issue& issue);
void write_issue(const std::filesystem::path& path, const Issue& issue);

// Passes through file-provided grouping, otherwise segments each page: every
// headline opens an article that absorbs following body blocks; leading body
// blocks form a headline-less article; captions and other blocks are skipped.
std::vector<Article> group_articles(const Issue& issue, const text::Tokenizer& tok = {});

std::string make_id(const IssueRef& ref, std::string_view local_id);

nlohmann::json to_json(const Article& a);
Article article_from_json(const nlohmann::json& j);

}  // namespace frontpage::corpus
