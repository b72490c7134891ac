#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "frontpage/corpus.hpp"
#include "frontpage/error.hpp"
#include "frontpage/teaser_detect.hpp"
#include "frontpage/unicode.hpp"
#include "oracles.hpp"

using namespace frontpage;
using namespace frontpage::detect;
namespace fs = std::filesystem;

namespace {

LanguageProfile english() {
    return load_profile(oracle::fixture_dir() / "profiles" / "daily_courier.json");
}

std::set<int> refs(std::string_view text, const LanguageProfile& p = english()) {
    return parse_page_refs(text, p.key_phrases, p.page_ref_grammar);
}

corpus::Issue front_page(std::vector<corpus::Block> blocks) {
    corpus::Issue issue;
    issue.title_id = "daily_courier";
    issue.date = "2024-05-01";
    issue.language = "en";
    for (std::uint32_t i = 0; i < blocks.size(); ++i) blocks[i].order = i;
    issue.pages.push_back({1, std::move(blocks)});
    issue.pages.push_back({5, {{"x", corpus::BlockKind::body, "inside", 0}}});
    return issue;
}

std::vector<corpus::Issue> fixture_issues() {
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(oracle::fixture_dir() / "issues")) paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
    std::vector<corpus::Issue> out;
    for (const auto& p : paths) out.push_back(corpus::ingest_issue(p, true).issue);
    return out;
}

}  // namespace

TEST_SUITE("teaser-detect") {

TEST_CASE("page references") {
    CHECK(refs("Full articles on Pages 8-9") == std::set<int>{8, 9});
    CHECK(refs("see page 5") == std::set<int>{5});
    CHECK(refs("More on pages 4, 6 and 7") == std::set<int>{4, 6});
    CHECK(refs("Pages 4,6") == std::set<int>{4, 6});
    CHECK(refs("story on page 12.") == std::set<int>{12});
    try {
        refs("no numbers here");
        FAIL("expected no_reference");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::no_reference);
    }
    CHECK_THROWS_AS(refs("pages 9-8"), Error);
    CHECK_THROWS_AS(refs("page 0"), Error);
    CHECK_THROWS_AS(refs("page 1000"), Error);
    CHECK_THROWS_AS(refs("page one of the plan costs 5 million"), Error);  // numeral outside the window
}

TEST_CASE("marker after the number") {
    PageRefGrammar g;
    g.marker_position = MarkerPosition::after_number;
    const std::vector<std::string> keys{"lk"};
    CHECK(parse_page_refs("Loe edasi 7. lk", keys, g) == std::set<int>{7});
    CHECK(parse_page_refs("vaata 4-5 lk", keys, g) == std::set<int>{4, 5});
}

TEST_CASE("phrase matching respects word boundaries and case") {
    CHECK(contains_phrase("See PAGE 4", "page"));
    CHECK_FALSE(contains_phrase("the webpage 4", "page"));
    CHECK(contains_phrase("ראו עמ' 4", "עמ"));
    CHECK_FALSE(contains_phrase("המשך בעמ' 6", "עמ"));
}

TEST_CASE("spec examples on a front page") {
    const auto p = english();
    const auto kids = front_page({{"b1", corpus::BlockKind::body,
                                   "Children destroyed stickers put up by the campaign across the city, page 5", 0}});
    const auto found = detect_teasers(kids, p);
    REQUIRE(found.size() == 1);
    CHECK(found[0].page_refs == std::set<int>{5});
    CHECK(found[0].id == "daily_courier/2024-05-01/b1");

    const auto nothing = front_page({{"b1", corpus::BlockKind::body, "A long story with no pointer to anything inside the paper", 0}});
    CHECK(detect_teasers(nothing, p).empty());

    const auto lead = front_page({{"b1", corpus::BlockKind::body,
                                   "The minister resigned late on Sunday after a long night of talks, continued on page 7", 0}});
    CHECK(detect_teasers(lead, p).empty());

    const auto short_header = front_page({{"b1", corpus::BlockKind::other, "Weather, page 5", 0}});
    CHECK(detect_teasers(short_header, p).empty());

    const auto caption = front_page({{"b1", corpus::BlockKind::caption,
                                      "Children destroyed stickers put up by the campaign across the city, page 5", 0}});
    CHECK(detect_teasers(caption, p).empty());

    const auto self = front_page({{"b1", corpus::BlockKind::body,
                                   "Nothing but a reference back to the front of this very paper, page 1", 0}});
    CHECK(detect_teasers(self, p).empty());
}

TEST_CASE("headline and blurb merge into one teaser") {
    const auto issue = corpus::ingest_issue(oracle::data_dir() / "small_issue.json", true).issue;
    const auto found = detect_teasers(issue, english());
    REQUIRE(found.size() == 1);
    const auto& t = found[0];
    CHECK(t.id == "daily_courier/2024-04-02/b4");
    CHECK(t.source_block_ids == std::vector<std::string>{"b3", "b4"});
    CHECK(t.anchor_block_id() == "b4");
    CHECK(t.page_refs == std::set<int>{3});
    CHECK(t.word_count == 25);
    CHECK(t.text.rfind("Council to vote on library plan ", 0) == 0);
    const auto back = teaser_from_json(to_json(t));
    CHECK(back.id == t.id);
    CHECK(back.page_refs == t.page_refs);
    CHECK(back.source_block_ids == t.source_block_ids);
}

TEST_CASE("Hebrew issue with the shipped profile") {
    const auto profile = load_profile(oracle::source_dir() / "data" / "profiles" / "hadashot.json");
    const auto issue = corpus::ingest_issue(oracle::data_dir() / "hebrew_issue.json", true).issue;
    const auto found = detect_teasers(issue, profile);
    REQUIRE(found.size() == 1);
    CHECK(found[0].page_refs == std::set<int>{4});
    CHECK(found[0].source_block_ids == std::vector<std::string>{"h1", "h2"});
    CHECK(found[0].word_count == 19);
}

TEST_CASE("shipped profiles load and validate") {
    std::set<std::string> languages;
    for (const auto& e : fs::directory_iterator(oracle::source_dir() / "data" / "profiles")) {
        const auto p = load_profile(e.path());
        CHECK_NOTHROW(p.validate());
        languages.insert(p.language);
    }
    CHECK(languages == std::set<std::string>{"el", "et", "he", "is", "it", "no", "pl"});
}

TEST_CASE("profile invariants") {
    auto p = english();
    p.continuation_phrases.push_back("PAGE");
    try {
        p.validate();
        FAIL("expected schema_violation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::schema_violation);
    }
    auto empty = english();
    empty.key_phrases.clear();
    CHECK_THROWS_AS(empty.validate(), Error);
    const auto round = profile_from_json(to_json(english()));
    CHECK(round.key_phrases == english().key_phrases);
    CHECK(round.min_words == 10);
}

TEST_CASE("detection on the fixture is deterministic and monotone in the profile") {
    const auto issues = fixture_issues();
    const auto base = english();
    auto more_continuations = base;
    more_continuations.continuation_phrases.push_back("see page");
    auto more_keys = base;
    more_keys.key_phrases.push_back("paqe");

    std::size_t total = 0;
    for (const auto& issue : issues) {
        const auto a = detect_teasers(issue, base);
        const auto b = detect_teasers(issue, base);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(to_json(a[i]) == to_json(b[i]));
        CHECK(detect_teasers(issue, more_continuations).size() <= a.size());
        CHECK(detect_teasers(issue, more_keys).size() >= a.size());
        for (const auto& t : a) {
            const bool has_key = std::any_of(base.key_phrases.begin(), base.key_phrases.end(),
                                             [&](const std::string& k) { return contains_phrase(t.text, k); });
            CHECK(has_key);
            CHECK(t.word_count >= base.min_words);
            CHECK_FALSE(t.page_refs.contains(1));
        }
        total += a.size();
    }
    CHECK(total == 82);
}

TEST_CASE("evaluation against a brute-force set comparison") {
    std::vector<GoldBlockLabel> gold;
    std::vector<Teaser> predicted;
    const corpus::IssueRef ref{"daily_courier", "2024-05-01"};
    for (int i = 0; i < 20; ++i) gold.push_back({ref, "g" + std::to_string(i), true, i < 2 ? "segmentation" : ""});
    gold.push_back({ref, "header", false, "length/header"});
    for (int i = 2; i < 20; ++i) {
        Teaser t;
        t.id = corpus::make_id(ref, "g" + std::to_string(i));
        t.issue_ref = ref;
        t.source_block_ids = {"g" + std::to_string(i)};
        predicted.push_back(t);
    }
    Teaser fp;
    fp.id = corpus::make_id(ref, "header");
    fp.issue_ref = ref;
    fp.source_block_ids = {"header"};
    predicted.push_back(fp);

    // Oracle: plain set algebra over block keys.
    std::set<std::string> gold_pos, pred;
    for (const auto& g : gold)
        if (g.is_teaser) gold_pos.insert(g.block_id);
    for (const auto& t : predicted) pred.insert(t.anchor_block_id());
    std::size_t tp = 0;
    for (const auto& k : pred) tp += gold_pos.count(k);

    const auto r = evaluate_detection(predicted, gold);
    CHECK(r.true_positives == tp);
    CHECK(r.false_positives == pred.size() - tp);
    CHECK(r.false_negatives == gold_pos.size() - tp);
    CHECK(r.precision == doctest::Approx(18.0 / 19.0).epsilon(1e-15));
    CHECK(r.recall == doctest::Approx(18.0 / 20.0).epsilon(1e-15));
    CHECK(r.error_breakdown.at("segmentation").false_negatives == 2);
    CHECK(r.error_breakdown.at("length/header").false_positives == 1);

    std::vector<Teaser> exact(predicted.begin(), predicted.end() - 1);
    std::vector<GoldBlockLabel> exact_gold;
    for (const auto& t : exact) exact_gold.push_back({ref, t.anchor_block_id(), true, ""});
    const auto perfect = evaluate_detection(exact, exact_gold);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);

    Teaser stranger;
    stranger.id = "other/2024-01-01/x";
    stranger.issue_ref = {"other", "2024-01-01"};
    stranger.source_block_ids = {"x"};
    std::vector<Teaser> mismatched{stranger};
    try {
        evaluate_detection(mismatched, gold);
        FAIL("expected mismatched_issues");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::mismatched_issues);
    }
}

TEST_CASE("fixture error breakdown is dominated by segmentation") {
    const auto issues = fixture_issues();
    const auto profile = english();
    std::vector<Teaser> all;
    for (const auto& issue : issues) {
        auto t = detect_teasers(issue, profile);
        all.insert(all.end(), t.begin(), t.end());
    }
    const auto gold = load_detection_gold(oracle::fixture_dir() / "gold" / "detection.jsonl");
    const auto r = evaluate_detection(all, gold);
    CHECK(r.recall >= 0.9);
    const double seg = r.error_share("segmentation");
    for (const auto& [cause, _] : r.error_breakdown) CHECK(seg >= r.error_share(cause));
    CHECK(seg > 0.5);
    CHECK(r.error_share("length/header") > r.error_share("ocr-noise"));
}

}  // TEST_SUITE
