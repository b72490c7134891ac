// Writes the synthetic English fixture corpus used by the end-to-end tests:
// issues with planted teasers, gold labels, and a replay cache of
// gold-consistent zero-shot answers. Output is a pure function of the seed.
//
//   frontpage_make_fixture <output-dir>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "frontpage/corpus.hpp"
#include "frontpage/jsonl.hpp"
#include "frontpage/llm_client.hpp"
#include "frontpage/matcher.hpp"
#include "frontpage/teaser_detect.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace frontpage;

namespace {

constexpr std::uint64_t kSeed = 20240301;
constexpr int kIssues = 20;
constexpr int kPages = 8;
const std::string kTitle = "daily_courier";

class Rng {
public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}
    // Modulo reduction keeps the stream identical across standard libraries.
    int below(int n) { return static_cast<int>(g_() % static_cast<std::uint64_t>(n)); }
    int between(int lo, int hi) { return lo + below(hi - lo + 1); }
    bool chance(double p) { return static_cast<double>(g_() >> 11) * 0x1.0p-53 < p; }
    template <class T>
    const T& pick(const std::vector<T>& v) { return v[static_cast<std::size_t>(below(static_cast<int>(v.size())))]; }

private:
    std::mt19937_64 g_;
};

const std::vector<std::string> kCommon = {
    "the", "a", "of", "in", "and", "to", "on", "for", "with", "at", "by", "from", "after", "before", "new",
    "city", "local", "officials", "said", "year", "week", "plan", "public", "people", "report", "support",
    "council", "state", "group", "members", "first", "last", "over", "more", "than", "their", "its", "was",
    "were", "has", "have", "will", "would", "could", "also", "while", "during", "about", "into", "two",
    "three", "several", "many", "according", "statement", "residents", "government", "region", "today"};

const std::vector<std::string> kNovel = {
    "dramatic", "surprising", "fresh", "bold", "quiet", "major", "sharp", "sweeping", "historic", "fierce",
    "modest", "rare", "sudden", "promising", "troubled", "urgent", "ambitious", "controversial", "unexpected",
    "heated", "landmark", "tense", "welcome", "costly", "remarkable"};

class Lexicon {
public:
    explicit Lexicon(Rng& rng) : rng_(rng) {}

    std::vector<std::string> topic(std::size_t n) {
        std::vector<std::string> out;
        while (out.size() < n) {
            std::string w;
            const int syllables = rng_.between(2, 3);
            for (int s = 0; s < syllables; ++s) {
                w += kConsonants[static_cast<std::size_t>(rng_.below(static_cast<int>(kConsonants.size())))];
                w += kVowels[static_cast<std::size_t>(rng_.below(static_cast<int>(kVowels.size())))];
                if (rng_.chance(0.3)) w += kConsonants[static_cast<std::size_t>(rng_.below(static_cast<int>(kConsonants.size())))];
            }
            if (w.find("pag") != std::string::npos || w.find("con") != std::string::npos) continue;
            if (used_.insert(w).second) out.push_back(w);
        }
        return out;
    }

private:
    static constexpr std::string_view kConsonants = "bdfgklmnrstvz";
    static constexpr std::string_view kVowels = "aeiou";
    Rng& rng_;
    std::set<std::string> used_;
};

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string noisy(std::string w, Rng& rng) {
    if (w.size() < 3) return w;
    const auto pos = static_cast<std::size_t>(rng.between(1, static_cast<int>(w.size()) - 1));
    static const std::string subs = "cilrnuvo";
    w[pos] = subs[static_cast<std::size_t>(rng.below(static_cast<int>(subs.size())))];
    return w;
}

struct Mix {
    double topic = 0.35;
    double novel = 0.0;
    double noise = 0.0;
};

std::string sentence(Rng& rng, const std::vector<std::vector<std::string>>& topics, int words, const Mix& mix,
                     int min_per_topic = 0) {
    std::vector<std::string> out;
    std::vector<int> from_topic;  // source index per word, -1 for others
    std::size_t next_topic = 0;
    for (int i = 0; i < words; ++i) {
        if (rng.chance(mix.topic)) {
            // Alternate between source topics so multi-document teasers cover each.
            const auto k = next_topic++ % topics.size();
            out.push_back(rng.pick(topics[k]));
            from_topic.push_back(static_cast<int>(k));
        } else {
            out.push_back(rng.chance(mix.novel) ? rng.pick(kNovel) : rng.pick(kCommon));
            from_topic.push_back(-1);
        }
    }
    // Teasers name at least a few of each story's own terms.
    for (std::size_t k = 0; k < topics.size(); ++k) {
        int have = static_cast<int>(std::count(from_topic.begin(), from_topic.end(), static_cast<int>(k)));
        for (std::size_t i = 0; i < out.size() && have < min_per_topic; ++i) {
            if (from_topic[i] != -1) continue;
            out[i] = rng.pick(topics[k]);
            from_topic[i] = static_cast<int>(k);
            ++have;
        }
    }
    std::string text;
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::string w = out[i];
        if (rng.chance(mix.noise)) w = noisy(w, rng);
        if (i == 0) w = capitalize(w);
        if (i) text += ' ';
        text += w;
    }
    return text + ".";
}

struct PlantedArticle {
    int page = 0;
    std::string headline_block;
    std::vector<std::string> body_blocks;
    std::vector<std::string> topic;
    std::string spec_id;
    std::string id;  // resolved after grouping
};

struct PlantedTeaser {
    std::string anchor_block;
    std::vector<std::size_t> articles;  // indexes into the issue's article list
    bool detectable = true;
    std::string cause;
};

struct Built {
    corpus::Issue issue;
    std::vector<PlantedArticle> articles;
    std::vector<PlantedTeaser> teasers;
    std::vector<detect::GoldBlockLabel> gold;
};

class IssueBuilder {
public:
    IssueBuilder(Rng& rng, Lexicon& lex, int index) : rng_(rng), lex_(lex), index_(index) {
        char date[16];
        std::snprintf(date, sizeof date, "2024-03-%02d", index + 1);
        b_.issue.title_id = kTitle;
        b_.issue.date = date;
        b_.issue.language = "en";
        for (int p = 1; p <= kPages; ++p) b_.issue.pages.push_back({p, {}});
    }

    Built build() {
        build_inner_pages();
        build_front_page();
        if (index_ % 2 == 0) attach_specs();
        return std::move(b_);
    }

private:
    corpus::Page& page(int n) { return b_.issue.pages[static_cast<std::size_t>(n - 1)]; }

    std::string add_block(int p, corpus::BlockKind kind, std::string text) {
        auto& pg = page(p);
        const std::string id = "p" + std::to_string(p) + "-b" + std::to_string(pg.blocks.size() + 1);
        pg.blocks.push_back({id, kind, std::move(text), static_cast<std::uint32_t>((pg.blocks.size() + 1) * 10)});
        return id;
    }

    void label(const std::string& block, bool is_teaser, std::string cause = {}) {
        b_.gold.push_back({b_.issue.ref(), block, is_teaser, std::move(cause)});
    }

    std::string article_body(const std::vector<std::string>& topic, int sentences) {
        std::string out;
        for (int s = 0; s < sentences; ++s) {
            if (s) out += ' ';
            out += sentence(rng_, {topic}, rng_.between(8, 14), {0.35, 0.0, 0.03});
        }
        return out;
    }

    void build_inner_pages() {
        for (int p = 2; p <= kPages; ++p) {
            if (p == 3) {
                // Headline-less continuation of the front-page lead.
                lead_topic_ = lex_.topic(10);
                add_block(3, corpus::BlockKind::body, "Continued from page 1. " + article_body(lead_topic_, 3));
            }
            if (rng_.chance(0.5)) add_block(p, corpus::BlockKind::other, "THE DAILY COURIER");
            const int n = rng_.between(5, 7);
            for (int a = 0; a < n; ++a) {
                PlantedArticle art;
                art.page = p;
                art.topic = lex_.topic(10);
                std::string headline;
                for (int w = 0; w < 4; ++w) headline += (w ? " " : "") + capitalize(rng_.pick(art.topic));
                art.headline_block = add_block(p, corpus::BlockKind::headline, headline);
                const int blocks = rng_.between(2, 3);
                for (int k = 0; k < blocks; ++k)
                    art.body_blocks.push_back(add_block(p, corpus::BlockKind::body, article_body(art.topic, rng_.between(3, 5))));
                if (rng_.chance(0.3)) add_block(p, corpus::BlockKind::caption, "Photo: " + capitalize(rng_.pick(art.topic)) + " archive");
                b_.articles.push_back(std::move(art));
            }
        }
    }

    std::vector<std::size_t> free_on_page(int p) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < b_.articles.size(); ++i)
            if (b_.articles[i].page == p && !used_.contains(i)) out.push_back(i);
        return out;
    }

    // Picks 1 or 2 unused articles and returns them with the reference text.
    std::pair<std::vector<std::size_t>, std::string> choose(bool multi) {
        for (;;) {
            const int p = rng_.between(2, kPages);
            auto free = free_on_page(p);
            if (!multi) {
                if (free.empty()) continue;
                return {{free[static_cast<std::size_t>(rng_.below(static_cast<int>(free.size())))]},
                        rng_.pick(std::vector<std::string>{"See page ", "More on page ", "Story, page ", "Full report on page "}) +
                            std::to_string(p) + "."};
            }
            if (rng_.chance(0.5) && free.size() >= 2) {
                return {{free[0], free[1]}, "See page " + std::to_string(p) + "."};
            }
            const int q = p + 1;
            if (q > kPages) continue;
            auto other = free_on_page(q);
            if (free.empty() || other.empty()) continue;
            if (rng_.chance(0.5)) return {{free[0], other[0]}, "Pages " + std::to_string(p) + "-" + std::to_string(q) + "."};
            return {{free[0], other[0]}, "Pages " + std::to_string(p) + ", " + std::to_string(q) + "."};
        }
    }

    int teaser_words() {
        const int r = rng_.below(100);
        if (r < 40) return rng_.between(10, 20);
        if (r < 75) return rng_.between(24, 44);
        if (r < 95) return rng_.between(52, 90);
        return rng_.between(100, 120);
    }

    std::string teaser_text(const std::vector<std::size_t>& arts, const std::string& ref, bool bullets) {
        std::vector<std::vector<std::string>> topics;
        for (auto i : arts) topics.push_back(b_.articles[i].topic);
        const Mix mix{0.5, 0.35, 0.02};
        const int total = teaser_words();
        if (bullets) {
            std::string out;
            for (std::size_t i = 0; i < topics.size(); ++i)
                out += "• " + sentence(rng_, {topics[i]}, std::max(6, total / static_cast<int>(topics.size())), mix, 3) + " ";
            return out + ref;
        }
        if (total <= 22 && arts.size() == 1 && rng_.chance(0.5)) {
            // One sentence with the reference folded in.
            std::string one = sentence(rng_, topics, total, mix, 3);
            one.pop_back();
            auto lower = ref;
            lower[0] = static_cast<char>(lower[0] - 'A' + 'a');
            return one + ", " + lower;
        }
        std::string out;
        int left = total;
        while (left > 0) {
            const int n = std::min(left, rng_.between(9, 22));
            out += sentence(rng_, topics, std::max(n, 4), mix, out.empty() ? 3 : 0) + " ";
            left -= n;
        }
        return out + ref;
    }

    void plant(bool multi, int form, bool detectable = true, const std::string& cause = {}) {
        auto [arts, ref] = choose(multi);
        for (auto i : arts) used_.insert(i);
        const bool bullets = multi && rng_.chance(0.3);
        std::string text = teaser_text(arts, ref, bullets);
        PlantedTeaser t;
        t.articles = arts;
        t.detectable = detectable;
        t.cause = cause;
        if (cause == "segmentation") {
            t.anchor_block = add_block(1, corpus::BlockKind::caption, text);
        } else if (cause == "ocr-noise") {
            const auto pos = text.rfind("age");
            text[pos + 1] = 'q';  // "page" -> "paqe"
            t.anchor_block = add_block(1, corpus::BlockKind::body, text);
        } else if (form == 1) {
            std::string headline;
            const auto& topic = b_.articles[arts[0]].topic;
            for (int w = 0; w < 3; ++w) headline += (w ? " " : "") + capitalize(rng_.pick(topic));
            const auto h = add_block(1, corpus::BlockKind::headline, headline);
            label(h, false, "teaser-headline");
            t.anchor_block = add_block(1, corpus::BlockKind::body, text);
        } else {
            t.anchor_block = add_block(1, corpus::BlockKind::body, text);
        }
        label(t.anchor_block, true, cause);
        b_.teasers.push_back(std::move(t));
    }

    void build_front_page() {
        label(add_block(1, corpus::BlockKind::other, "THE DAILY COURIER"), false);
        label(add_block(1, corpus::BlockKind::other, "Weather, page 2"), false, "length/header");
        // Lead story that continues inside: not a teaser.
        std::string lead_headline;
        for (int w = 0; w < 4; ++w) lead_headline += (w ? " " : "") + capitalize(rng_.pick(lead_topic_));
        label(add_block(1, corpus::BlockKind::headline, lead_headline), false);
        label(add_block(1, corpus::BlockKind::body, article_body(lead_topic_, 4) + " Continued on page 3."), false,
              "continuation");
        label(add_block(1, corpus::BlockKind::caption, "Photo: " + capitalize(rng_.pick(lead_topic_)) + " staff"), false);

        const bool multi_first = rng_.chance(0.5);
        plant(multi_first, 0);
        plant(false, 1);
        plant(!multi_first, 0);
        plant(false, 0);
        // Undetectable plants and header false positives in roughly the
        // proportions of the paper's error analysis (segmentation dominates).
        if (index_ < 7) plant(index_ == 0 || index_ == 4, 0, false, "segmentation");
        else if (index_ == 7) plant(false, 0, false, "ocr-noise");
        if (index_ % 10 == 0) {
            const int p = rng_.between(2, kPages);
            label(add_block(1, corpus::BlockKind::other,
                            "Inside today: weekend arts guide, puzzles, letters to the editor and the complete "
                            "television listings on page " + std::to_string(p) + "."),
                  false, "length/header");
        }
    }

    void attach_specs() {
        std::vector<corpus::ArticleSpec> specs;
        for (std::size_t i = 0; i < b_.articles.size(); ++i) {
            auto& a = b_.articles[i];
            a.spec_id = "art-" + std::to_string(i + 1);
            specs.push_back({a.spec_id, {a.page}, a.headline_block, a.body_blocks});
        }
        b_.issue.articles = std::move(specs);
    }

    Rng& rng_;
    Lexicon& lex_;
    int index_;
    Built b_;
    std::vector<std::string> lead_topic_;
    std::set<std::size_t> used_;
};

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: frontpage_make_fixture <output-dir>\n";
        return 2;
    }
    const fs::path out = argv[1];
    Rng rng(kSeed);
    Lexicon lex(rng);

    const json profile_doc = {{"language", "en"},
                              {"title_id", kTitle},
                              {"key_phrases", {"page", "pages"}},
                              {"continuation_phrases", {"continued on", "continues on"}},
                              {"page_ref_grammar", {{"marker_position", "before"}, {"window_tokens", 3}, {"max_page", 999}}},
                              {"min_words", 10},
                              {"front_page_only", true},
                              {"key_phrase_position", "anywhere"},
                              {"tokenizer", {{"lowercase", true}, {"strip_punctuation", true}}}};
    const auto profile = detect::profile_from_json(profile_doc);

    fs::remove_all(out / "issues");
    jsonl::write_document(out / "profiles" / (kTitle + ".json"), profile_doc);

    std::vector<json> detection_gold, pair_gold, calibration_gold, cache_entries, expected_samples;
    std::size_t planted = 0, planted_multi = 0, detectable = 0, detectable_multi = 0, calibration_teasers = 0;
    bool malformed_written = false;

    for (int i = 0; i < kIssues; ++i) {
        IssueBuilder builder(rng, lex, i);
        Built b = builder.build();
        const auto ref = b.issue.ref();
        corpus::write_issue(out / "issues" / (kTitle + "_" + b.issue.date + ".json"), b.issue);

        // Resolve article ids exactly as the pipeline will.
        const auto issue = corpus::ingest_issue_json(corpus::serialize_issue(b.issue), true).issue;
        const auto articles = corpus::group_articles(issue);
        for (auto& a : b.articles)
            a.id = corpus::make_id(ref, a.spec_id.empty() ? a.headline_block : a.spec_id);
        for (const auto& a : b.articles)
            if (std::none_of(articles.begin(), articles.end(), [&](const corpus::Article& x) { return x.id == a.id; }))
                throw std::runtime_error("planted article " + a.id + " not produced by grouping");

        for (const auto& g : b.gold)
            detection_gold.push_back({{"title_id", g.issue_ref.title_id},
                                      {"date", g.issue_ref.date},
                                      {"block_id", g.block_id},
                                      {"is_teaser", g.is_teaser},
                                      {"cause", g.cause.empty() ? json(nullptr) : json(g.cause)}});

        std::map<std::string, std::set<std::string>> positives;  // teaser id -> article ids
        for (const auto& t : b.teasers) {
            const auto tid = corpus::make_id(ref, t.anchor_block);
            ++planted;
            if (t.articles.size() > 1) ++planted_multi;
            for (auto idx : t.articles) positives[tid].insert(b.articles[idx].id);
            if (!t.detectable) continue;
            ++detectable;
            if (t.articles.size() > 1) ++detectable_multi;
            std::vector<const PlantedArticle*> docs;
            for (auto idx : t.articles) docs.push_back(&b.articles[idx]);
            json ids = json::array();
            for (const auto* d : docs) ids.push_back(d->id);
            expected_samples.push_back({{"id", tid}, {"document_ids", ids}});
        }

        const auto teasers = detect::detect_teasers(issue, profile);
        const auto candidates = match::build_candidates(teasers, articles);
        const auto texts = match::TextIndex::build(teasers, articles);
        const auto prompts = llm::PromptLibrary::defaults();
        std::set<std::string> pair_keys;
        std::set<std::string> in_calibration;
        for (const auto& c : candidates) {
            const bool label = positives.contains(c.teaser_id) && positives[c.teaser_id].contains(c.article_id);
            const json record{{"teaser_id", c.teaser_id}, {"article_id", c.article_id}, {"label", label}};
            pair_gold.push_back(record);
            pair_keys.insert(c.teaser_id + "|" + c.article_id);
            if (calibration_teasers < 50 || in_calibration.contains(c.teaser_id)) {
                if (in_calibration.insert(c.teaser_id).second) ++calibration_teasers;
                calibration_gold.push_back(record);
            }
            std::string answer = label ? "Yes" : "No";
            if (!label && !malformed_written) {
                answer = "Possibly; the text mentions related events.";
                malformed_written = true;
            }
            const auto prompt = match::match_prompt(prompts, texts.article(c.article_id), texts.teaser(c.teaser_id));
            cache_entries.push_back(llm::ReplayCache::make_entry(prompt, answer, {}, "fixture"));
        }
        // Planted pairs of teasers the detector cannot see stay in gold too.
        for (const auto& [tid, arts] : positives)
            for (const auto& aid : arts)
                if (!pair_keys.contains(tid + "|" + aid))
                    pair_gold.push_back({{"teaser_id", tid}, {"article_id", aid}, {"label", true}});
    }

    jsonl::write(out / "gold" / "detection.jsonl", detection_gold);
    jsonl::write(out / "gold" / "pairs.jsonl", pair_gold);
    jsonl::write(out / "gold" / "calibration.jsonl", calibration_gold);
    jsonl::write(out / "cache" / "zero_shot.jsonl", cache_entries);
    jsonl::write(out / "gold" / "expected_samples.jsonl", expected_samples);
    const json expected{{"issues", kIssues},
                        {"planted_teasers", planted},
                        {"planted_multi_doc", planted_multi},
                        {"detectable_teasers", detectable},
                        {"detectable_multi_doc", detectable_multi},
                        {"calibration_teasers", calibration_teasers}};
    jsonl::write_document(out / "gold" / "expected.json", expected);
    std::cout << expected.dump(2) << "\n";
    return 0;
}
