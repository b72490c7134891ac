#include "frontpage/corpus.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <unordered_set>

#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"
#include "frontpage/unicode.hpp"

namespace frontpage::corpus {

using nlohmann::json;

std::string_view to_string(BlockKind k) noexcept {
    switch (k) {
        case BlockKind::headline: return "headline";
        case BlockKind::body: return "body";
        case BlockKind::caption: return "caption";
        case BlockKind::other: return "other";
    }
    return "other";
}

std::optional<BlockKind> block_kind_from_string(std::string_view s) noexcept {
    if (s == "headline") return BlockKind::headline;
    if (s == "body") return BlockKind::body;
    if (s == "caption") return BlockKind::caption;
    if (s == "other") return BlockKind::other;
    return std::nullopt;
}

const Page* Issue::find_page(int number) const {
    for (const auto& p : pages)
        if (p.number == number) return &p;
    return nullptr;
}

const Block* Issue::find_block(std::string_view id) const {
    for (const auto& p : pages)
        for (const auto& b : p.blocks)
            if (b.id == id) return &b;
    return nullptr;
}

std::size_t Issue::block_count() const {
    std::size_t n = 0;
    for (const auto& p : pages) n += p.blocks.size();
    return n;
}

std::string Article::full_text() const {
    if (!headline) return body;
    if (body.empty()) return *headline;
    return *headline + "\n" + body;
}

std::string make_id(const IssueRef& ref, std::string_view local_id) {
    return ref.title_id + "/" + ref.date + "/" + std::string(local_id);
}

namespace {

class Validator {
public:
    Validator(bool strict, std::string_view origin, std::vector<std::string>& warnings)
        : strict_(strict), origin_(origin), warnings_(warnings) {}

    [[noreturn]] void fail(Errc code, const std::string& what) const {
        throw Error(code, std::string(origin_) + ": " + what);
    }

    // Returns true when the caller should drop the offending element.
    bool violation(const std::string& what) {
        if (strict_) fail(Errc::schema_violation, what);
        warnings_.push_back(std::string(origin_) + ": " + what + " (dropped)");
        return true;
    }

private:
    bool strict_;
    std::string_view origin_;
    std::vector<std::string>& warnings_;
};

const json* field(const json& obj, const char* name) {
    auto it = obj.find(name);
    return it == obj.end() ? nullptr : &*it;
}

std::string required_string(const json& obj, const char* name, Validator& v, const std::string& where) {
    const json* f = field(obj, name);
    if (!f || !f->is_string()) v.fail(Errc::schema_violation, where + ": missing string field '" + name + "'");
    return f->get<std::string>();
}

}  // namespace

IngestResult ingest_issue_json(const json& doc, bool strict, std::string_view origin) {
    IngestResult result;
    Validator v(strict, origin, result.warnings);
    if (!doc.is_object()) v.fail(Errc::malformed_document, "document is not an object");

    Issue& issue = result.issue;
    issue.title_id = required_string(doc, "title_id", v, "issue");
    issue.date = required_string(doc, "date", v, "issue");
    issue.language = required_string(doc, "language", v, "issue");
    static const std::regex iso_date(R"(\d{4}-\d{2}-\d{2})");
    if (!std::regex_match(issue.date, iso_date))
        v.fail(Errc::schema_violation, "issue: date '" + issue.date + "' is not ISO-8601 (YYYY-MM-DD)");
    if (issue.title_id.empty()) v.fail(Errc::schema_violation, "issue: empty title_id");

    const json* pages = field(doc, "pages");
    if (!pages || !pages->is_array()) v.fail(Errc::schema_violation, "issue: missing array field 'pages'");

    std::unordered_set<int> page_numbers;
    std::unordered_set<std::string> block_ids;
    for (const auto& pj : *pages) {
        if (!pj.is_object()) v.fail(Errc::schema_violation, "page is not an object");
        const json* num = field(pj, "number");
        if (!num || !num->is_number_integer() || num->get<long long>() <= 0)
            v.fail(Errc::schema_violation, "page: 'number' must be a positive integer");
        Page page;
        page.number = num->get<int>();
        if (!page_numbers.insert(page.number).second)
            v.fail(Errc::duplicate_page, "duplicate page number " + std::to_string(page.number));
        const json* blocks = field(pj, "blocks");
        if (!blocks || !blocks->is_array())
            v.fail(Errc::schema_violation, "page " + std::to_string(page.number) + ": missing array 'blocks'");

        std::optional<std::uint32_t> last_order;
        for (const auto& bj : *blocks) {
            const std::string where = "page " + std::to_string(page.number) + " block";
            if (!bj.is_object()) {
                v.violation(where + " is not an object");
                continue;
            }
            const json* id = field(bj, "id");
            const json* kind = field(bj, "kind");
            const json* order = field(bj, "order");
            const json* text = field(bj, "text");
            if (!id || !id->is_string() || id->get<std::string>().empty()) {
                v.violation(where + ": missing 'id'");
                continue;
            }
            Block b;
            b.id = id->get<std::string>();
            const std::string bwhere = where + " '" + b.id + "'";
            if (!kind || !kind->is_string() || !block_kind_from_string(kind->get<std::string>())) {
                v.violation(bwhere + ": missing or unknown 'kind'");
                continue;
            }
            b.kind = *block_kind_from_string(kind->get<std::string>());
            if (!order || !order->is_number_integer() || order->get<long long>() < 0) {
                v.violation(bwhere + ": 'order' must be a non-negative integer");
                continue;
            }
            b.order = order->get<std::uint32_t>();
            if (!text || !text->is_string()) {
                v.violation(bwhere + ": missing 'text'");
                continue;
            }
            b.text = unicode::normalize_nfc(text->get<std::string>());
            if (unicode::is_blank(b.text)) {
                v.violation(bwhere + ": empty text");
                continue;
            }
            if (last_order && b.order <= *last_order) {
                v.violation(bwhere + ": order does not increase within page");
                continue;
            }
            if (block_ids.contains(b.id)) {
                v.violation(bwhere + ": duplicate block id");
                continue;
            }
            block_ids.insert(b.id);
            last_order = b.order;
            page.blocks.push_back(std::move(b));
        }
        issue.pages.push_back(std::move(page));
    }

    if (const json* arts = field(doc, "articles"); arts && !arts->is_null()) {
        if (!arts->is_array()) v.fail(Errc::schema_violation, "issue: 'articles' must be an array");
        std::vector<ArticleSpec> specs;
        std::unordered_set<std::string> seen;
        for (const auto& aj : *arts) {
            if (!aj.is_object()) {
                v.violation("article is not an object");
                continue;
            }
            ArticleSpec spec;
            const json* id = field(aj, "id");
            if (!id || !id->is_string() || id->get<std::string>().empty()) {
                v.violation("article: missing 'id'");
                continue;
            }
            spec.id = id->get<std::string>();
            const std::string where = "article '" + spec.id + "'";
            if (!seen.insert(spec.id).second) {
                v.violation(where + ": duplicate id");
                continue;
            }
            const json* pns = field(aj, "page_numbers");
            if (!pns || !pns->is_array() || pns->empty()) {
                v.violation(where + ": 'page_numbers' must be a non-empty array");
                continue;
            }
            bool ok = true;
            for (const auto& pn : *pns) {
                if (!pn.is_number_integer() || !page_numbers.contains(pn.get<int>())) {
                    ok = false;
                    break;
                }
                spec.page_numbers.push_back(pn.get<int>());
            }
            if (!ok) {
                v.violation(where + ": page_numbers reference missing pages");
                continue;
            }
            if (const json* h = field(aj, "headline_block"); h && !h->is_null()) {
                if (!h->is_string()) {
                    v.violation(where + ": 'headline_block' must be a string");
                    continue;
                }
                if (block_ids.contains(h->get<std::string>()))
                    spec.headline_block = h->get<std::string>();
                else
                    v.violation(where + ": headline block '" + h->get<std::string>() + "' not found");
            }
            const json* bodies = field(aj, "body_blocks");
            if (!bodies || !bodies->is_array()) {
                v.violation(where + ": missing array 'body_blocks'");
                continue;
            }
            for (const auto& bb : *bodies) {
                if (!bb.is_string()) {
                    v.violation(where + ": body block id is not a string");
                    continue;
                }
                if (block_ids.contains(bb.get<std::string>()))
                    spec.body_blocks.push_back(bb.get<std::string>());
                else
                    v.violation(where + ": body block '" + bb.get<std::string>() + "' not found");
            }
            specs.push_back(std::move(spec));
        }
        issue.articles = std::move(specs);
    }
    return result;
}

IngestResult ingest_issue(const std::filesystem::path& path, bool strict) {
    return ingest_issue_json(jsonl::read_document(path), strict, path.filename().string());
}

json serialize_issue(const Issue& issue) {
    json pages = json::array();
    for (const auto& p : issue.pages) {
        json blocks = json::array();
        for (const auto& b : p.blocks)
            blocks.push_back({{"id", b.id}, {"kind", to_string(b.kind)}, {"order", b.order}, {"text", b.text}});
        pages.push_back({{"number", p.number}, {"blocks", blocks}});
    }
    json doc = {{"title_id", issue.title_id}, {"date", issue.date}, {"language", issue.language}, {"pages", pages}};
    if (issue.articles) {
        json arts = json::array();
        for (const auto& a : *issue.articles) {
            arts.push_back({{"id", a.id},
                            {"page_numbers", a.page_numbers},
                            {"headline_block", a.headline_block ? json(*a.headline_block) : json(nullptr)},
                            {"body_blocks", a.body_blocks}});
        }
        doc["articles"] = arts;
    }
    return doc;
}

void write_issue(const std::filesystem::path& path, const Issue& issue) {
    jsonl::write_document(path, serialize_issue(issue));
}

namespace {

struct BlockLocation {
    const Block* block;
    int page;
};

std::string join_lines(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back('\n');
        out += parts[i];
    }
    return out;
}

void finish(Article& a, const std::vector<std::string>& bodies, const text::Tokenizer& tok) {
    a.body = join_lines(bodies);
    a.word_count = tok.count(a.body) + (a.headline ? tok.count(*a.headline) : 0);
}

}  // namespace

std::vector<Article> group_articles(const Issue& issue, const text::Tokenizer& tok) {
    std::vector<Article> out;
    const IssueRef ref = issue.ref();

    if (issue.articles) {
        std::map<std::string, BlockLocation, std::less<>> where;
        for (const auto& p : issue.pages)
            for (const auto& b : p.blocks) where.emplace(b.id, BlockLocation{&b, p.number});
        for (const auto& spec : *issue.articles) {
            Article a;
            a.id = make_id(ref, spec.id);
            a.issue_ref = ref;
            a.page_numbers.insert(spec.page_numbers.begin(), spec.page_numbers.end());
            std::optional<BlockLocation> first;
            if (spec.headline_block) {
                const auto& loc = where.at(*spec.headline_block);
                a.headline = loc.block->text;
                a.block_ids.push_back(loc.block->id);
                first = loc;
            }
            std::vector<std::string> bodies;
            for (const auto& id : spec.body_blocks) {
                const auto& loc = where.at(id);
                bodies.push_back(loc.block->text);
                a.block_ids.push_back(id);
                if (!first) first = loc;
            }
            if (!first) continue;
            a.first_page = first->page;
            a.first_order = first->block->order;
            finish(a, bodies, tok);
            out.push_back(std::move(a));
        }
        return out;
    }

    for (const auto& page : issue.pages) {
        std::optional<Article> cur;
        std::vector<std::string> bodies;
        auto flush = [&] {
            if (cur) {
                finish(*cur, bodies, tok);
                out.push_back(std::move(*cur));
            }
            cur.reset();
            bodies.clear();
        };
        auto open = [&](const Block& b) {
            Article a;
            a.id = make_id(ref, b.id);
            a.issue_ref = ref;
            a.page_numbers = {page.number};
            a.first_page = page.number;
            a.first_order = b.order;
            cur = std::move(a);
        };
        for (const auto& b : page.blocks) {
            if (b.kind == BlockKind::headline) {
                flush();
                open(b);
                cur->headline = b.text;
                cur->block_ids.push_back(b.id);
            } else if (b.kind == BlockKind::body) {
                if (!cur) open(b);
                bodies.push_back(b.text);
                cur->block_ids.push_back(b.id);
            }
        }
        flush();
    }
    return out;
}

json to_json(const Article& a) {
    return {{"id", a.id},
            {"title_id", a.issue_ref.title_id},
            {"date", a.issue_ref.date},
            {"page_numbers", a.page_numbers},
            {"headline", a.headline ? json(*a.headline) : json(nullptr)},
            {"body", a.body},
            {"word_count", a.word_count},
            {"first_page", a.first_page},
            {"first_order", a.first_order},
            {"block_ids", a.block_ids}};
}

Article article_from_json(const json& j) {
    Article a;
    try {
        a.id = j.at("id").get<std::string>();
        a.issue_ref = {j.at("title_id").get<std::string>(), j.at("date").get<std::string>()};
        for (const auto& p : j.at("page_numbers")) a.page_numbers.insert(p.get<int>());
        if (j.contains("headline") && !j["headline"].is_null()) a.headline = j["headline"].get<std::string>();
        a.body = j.at("body").get<std::string>();
        a.word_count = j.at("word_count").get<std::size_t>();
        a.first_page = j.value("first_page", 0);
        a.first_order = j.value("first_order", 0u);
        if (j.contains("block_ids")) a.block_ids = j["block_ids"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("article record: ") + e.what());
    }
    return a;
}

}  // namespace frontpage::corpus
