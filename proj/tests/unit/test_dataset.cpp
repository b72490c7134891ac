#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fixture_pipeline.hpp"
#include "frontpage/dataset.hpp"
#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"
#include "oracles.hpp"

using namespace frontpage;
using namespace frontpage::dataset;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const oracle::FixtureRun& fixture() {
    static const oracle::FixtureRun run = oracle::run_fixture_pipeline();
    return run;
}

corpus::Article article(std::string id, int page, std::uint32_t order, std::string body) {
    corpus::Article a;
    a.id = std::move(id);
    a.issue_ref = {"daily_courier", "2024-03-01"};
    a.page_numbers = {page};
    a.first_page = page;
    a.first_order = order;
    a.body = std::move(body);
    return a;
}

detect::Teaser teaser(std::string id, std::string text) {
    detect::Teaser t;
    t.id = std::move(id);
    t.issue_ref = {"daily_courier", "2024-03-01"};
    t.text = std::move(text);
    t.page_refs = {2};
    t.source_block_ids = {"b"};
    return t;
}

match::CandidatePair decided(std::string t, std::string a, match::Decision d) {
    return {std::move(t), std::move(a), 0.5, d, match::Backend::tfidf};
}

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("frontpage_test_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_SUITE("dataset-builder") {

TEST_CASE("assembly groups matches per teaser in page order") {
    std::vector<corpus::Article> arts{article("a3", 3, 10, "third"), article("a2", 2, 20, "second"),
                                      article("a1", 2, 10, "first"), article("a9", 9, 0, "unused")};
    std::vector<detect::Teaser> ts{teaser("t1", "One teaser, page 2."), teaser("t2", "Three of them, pages 2-3."),
                                   teaser("t3", "Nothing matched here.")};
    std::vector<match::CandidatePair> ds{decided("t1", "a1", match::Decision::match),
                                         decided("t2", "a3", match::Decision::match),
                                         decided("t2", "a1", match::Decision::match),
                                         decided("t2", "a2", match::Decision::match),
                                         decided("t3", "a9", match::Decision::no_match),
                                         decided("t3", "a2", match::Decision::undecided)};
    const auto out = assemble(ts, arts, ds, {{"daily_courier", "en"}});
    REQUIRE(out.samples.size() == 2);
    CHECK_FALSE(out.samples[0].is_multi_doc);
    CHECK(out.samples[0].documents == std::vector<std::string>{"first"});
    CHECK(out.samples[1].is_multi_doc);
    CHECK(out.samples[1].document_ids == std::vector<std::string>{"a1", "a2", "a3"});
    CHECK(out.samples[1].language == "en");
    CHECK(out.dropped.teasers_without_match == std::vector<std::string>{"t3"});
    CHECK(out.dropped.undecided_pairs == 1);

    std::vector<match::CandidatePair> dangling{decided("t1", "ghost", match::Decision::match)};
    try {
        assemble(ts, arts, dangling);
        FAIL("expected dangling_reference");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::dangling_reference);
    }
}

TEST_CASE("summary shapes") {
    CHECK(classify_shape("A. B. C.") == Shape::paragraph);
    CHECK(classify_shape("Single sentence here.") == Shape::one_sentence);
    CHECK(classify_shape("• item one\n• item two") == Shape::highlights);
    CHECK(classify_shape("• one • two, page 4") == Shape::highlights);
    CHECK(classify_shape("first line\nsecond line") == Shape::highlights);
    CHECK(classify_shape("No terminal punctuation, see page 4") == Shape::one_sentence);
    CHECK(classify_shape("Dr. Smith arrived. He spoke.") == Shape::paragraph);
    CHECK(count_sentences("One. Two! Three? ") == 3);
    CHECK(count_sentences("3.5 percent rise.") == 1);
    for (auto s : kShapes) CHECK(shape_from_string(to_string(s)) == s);
}

TEST_CASE("datacard arithmetic on two samples") {
    Sample single{"s1", "Short summary here.", {"one two three four five six seven eight"}, {"a"}, false,
                  text::LengthCategory::c0_25, Shape::one_sentence, {"t", "d"}, "en"};
    Sample multi{"s2", "Another summary.", {"x y", "z w", "u v"}, {"b", "c", "d"}, true,
                 text::LengthCategory::c0_25, Shape::one_sentence, {"t", "d"}, "en"};
    const std::vector<Sample> samples{single, multi};
    const auto card = build_datacard(samples);
    CHECK(card.size == 2);
    CHECK(card.multi_doc.count == 1);
    CHECK(card.avg_cluster_size == 3.0);
    CHECK(card.multi_doc_fraction == 0.5);
    CHECK(card.single_doc.avg_text_words == 8.0);
    CHECK(card.multi_doc.avg_text_words == 6.0);
    CHECK(card.languages == std::vector<std::string>{"en"});
    CHECK(card.shape_counts.at(Shape::one_sentence) == 2);
    CHECK(to_json(card)["size"] == 2);
    CHECK(format_datacard(card).find("Average number of articles in cluster") != std::string::npos);
    try {
        build_datacard(std::vector<Sample>{});
        FAIL("expected empty_dataset");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_dataset);
    }
}

TEST_CASE("fixture samples equal the planted ground truth") {
    const auto& run = fixture();
    const auto expected = jsonl::read(oracle::fixture_dir() / "gold" / "expected_samples.jsonl");
    std::map<std::string, std::vector<std::string>> want;
    for (const auto& e : expected) want[e["id"]] = e["document_ids"].get<std::vector<std::string>>();
    std::map<std::string, std::vector<std::string>> got;
    for (const auto& s : run.assembly.samples) got[s.id] = s.document_ids;
    CHECK(got == want);
}

TEST_CASE("fixture datacard equals an independent aggregation") {
    const auto& samples = fixture().assembly.samples;
    const auto card = build_datacard(samples);
    const text::Tokenizer tok;

    std::map<Shape, std::size_t> shapes;
    std::map<text::LengthCategory, std::size_t> bands;
    std::size_t multi = 0, docs_in_multi = 0;
    double novel1 = 0, compression = 0, summary_words_single = 0;
    std::size_t singles = 0, long_enough = 0;
    for (const auto& s : samples) {
        ++shapes[classify_shape(s.summary)];
        ++bands[text::length_category(s.summary)];
        if (s.documents.size() >= 2) {
            ++multi;
            docs_in_multi += s.documents.size();
        } else {
            ++singles;
            summary_words_single += static_cast<double>(text::tokenize(s.summary).size());
        }
        if (!text::tokenize(s.summary).empty()) {
            novel1 += text::novel_ngram_ratio(s.summary, s.documents, 1);
            ++long_enough;
        }
        std::size_t src = 0;
        for (const auto& d : s.documents) src += text::tokenize(d).size();
        compression += std::clamp(1.0 - static_cast<double>(text::tokenize(s.summary).size()) / static_cast<double>(src),
                                  0.0, 1.0);
    }
    const auto n = static_cast<double>(samples.size());
    CHECK(card.size == samples.size());
    CHECK(card.multi_doc.count == multi);
    CHECK(card.avg_cluster_size == doctest::Approx(static_cast<double>(docs_in_multi) / static_cast<double>(multi)));
    CHECK(card.novel_ngram[0] == doctest::Approx(novel1 / static_cast<double>(long_enough)).epsilon(1e-12));
    CHECK(card.compression == doctest::Approx(compression / n).epsilon(1e-12));
    CHECK(card.single_doc.avg_summary_words ==
          doctest::Approx(summary_words_single / static_cast<double>(singles)).epsilon(1e-12));
    std::size_t shape_total = 0, band_total = 0;
    for (const auto& [s, c] : card.shape_counts) {
        CHECK(c == shapes[s]);
        shape_total += c;
    }
    for (const auto& [b, c] : card.length_counts) {
        CHECK(c == bands[b]);
        band_total += c;
    }
    CHECK(shape_total == card.size);
    CHECK(band_total == card.size);
    const auto table = corpus_table_json(samples);
    CHECK(table.size() == 1);
}

TEST_CASE("export round trip, manifest schema and idempotence") {
    const auto& samples = fixture().assembly.samples;
    const auto dir = temp_dir("export");
    const auto res = export_samples(samples, dir, {});
    CHECK(res.files.size() == 2);
    CHECK(import_samples(dir / "samples.jsonl") == samples);
    for (const auto& j : jsonl::read(dir / "manifest.jsonl")) {
        CHECK_FALSE(j.contains("summary"));
        CHECK_FALSE(j.contains("documents"));
        CHECK(j.contains("document_ids"));
        CHECK(j.contains("title_id"));
    }
    const auto first = jsonl::read_text(dir / "samples.jsonl");
    const auto first_manifest = jsonl::read_text(dir / "manifest.jsonl");
    export_samples(samples, dir, {});
    CHECK(jsonl::read_text(dir / "samples.jsonl") == first);
    CHECK(jsonl::read_text(dir / "manifest.jsonl") == first_manifest);

    const auto only = temp_dir("export_manifest");
    export_samples(samples, only, {.manifest_only = true});
    CHECK_FALSE(fs::exists(only / "samples.jsonl"));
    CHECK(jsonl::read_text(only / "manifest.jsonl") == first_manifest);
    fs::remove_all(dir);
    fs::remove_all(only);
}

TEST_CASE("OCR-corrected export follows the replay cache") {
    Sample s{"s1", "tbe cat sat", {"the dog ran"}, {"a1"}, false, text::LengthCategory::c0_25,
             Shape::one_sentence, {"t", "d"}, "English"};
    const auto prompts = llm::PromptLibrary::defaults();
    auto cache = std::make_shared<llm::ReplayCache>();
    auto prompt = [&](const std::string& t) {
        return prompts.render(llm::Task::ocr_fix, {{"text", t}, {"language", "English"}});
    };
    cache->store(prompt("tbe cat sat"), "the cat sat", {});
    cache->store(prompt("the dog ran"), "the dog ran", {});
    llm::LlmClient client({}, cache, nullptr);
    const auto dir = temp_dir("export_ocr");
    const std::vector<Sample> one{s};
    const auto res = export_samples(one, dir, {.with_ocr_fix = true}, &client, &prompts);
    CHECK(res.warnings.empty());
    const auto corrected = import_samples(dir / "samples.corrected.jsonl");
    REQUIRE(corrected.size() == 1);
    CHECK(corrected[0].summary == "the cat sat");
    CHECK(import_samples(dir / "samples.jsonl")[0].summary == "tbe cat sat");
    CHECK_THROWS_AS(export_samples(one, dir, {.with_ocr_fix = true}), Error);
    fs::remove_all(dir);
}

TEST_CASE("sample JSON rejects an inconsistent multi-doc flag") {
    auto j = to_json(fixture().assembly.samples.front());
    j["is_multi_doc"] = !j["is_multi_doc"].get<bool>();
    CHECK_THROWS_AS(sample_from_json(j), Error);
}

}  // TEST_SUITE
