#include "frontpage/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"
#include "frontpage/unicode.hpp"

namespace frontpage::dataset {

using nlohmann::json;

std::string_view to_string(Shape s) noexcept {
    switch (s) {
        case Shape::paragraph: return "paragraph";
        case Shape::one_sentence: return "one_sentence";
        case Shape::highlights: return "highlights";
    }
    return "paragraph";
}

Shape shape_from_string(std::string_view s) {
    if (s == "paragraph") return Shape::paragraph;
    if (s == "one_sentence") return Shape::one_sentence;
    if (s == "highlights") return Shape::highlights;
    throw Error(Errc::schema_violation, "unknown shape '" + std::string(s) + "'");
}

json to_json(const Sample& s) {
    return {{"id", s.id},
            {"summary", s.summary},
            {"documents", s.documents},
            {"document_ids", s.document_ids},
            {"is_multi_doc", s.is_multi_doc},
            {"length_category", text::to_string(s.length_category)},
            {"shape", to_string(s.shape)},
            {"title_id", s.issue_ref.title_id},
            {"date", s.issue_ref.date},
            {"language", s.language}};
}

json to_manifest_json(const Sample& s) {
    json j = to_json(s);
    j.erase("summary");
    j.erase("documents");
    return j;
}

Sample sample_from_json(const json& j) {
    Sample s;
    try {
        s.id = j.at("id").get<std::string>();
        s.summary = j.at("summary").get<std::string>();
        s.documents = j.at("documents").get<std::vector<std::string>>();
        s.document_ids = j.at("document_ids").get<std::vector<std::string>>();
        s.is_multi_doc = j.at("is_multi_doc").get<bool>();
        s.length_category = text::length_category_from_string(j.at("length_category").get<std::string>());
        s.shape = shape_from_string(j.at("shape").get<std::string>());
        s.issue_ref = {j.at("title_id").get<std::string>(), j.at("date").get<std::string>()};
        s.language = j.at("language").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("sample record: ") + e.what());
    }
    if (s.documents.empty() || s.is_multi_doc != (s.documents.size() >= 2))
        throw Error(Errc::schema_violation, "sample '" + s.id + "': is_multi_doc inconsistent with documents");
    return s;
}

Assembly assemble(std::span<const detect::Teaser> teasers, std::span<const corpus::Article> articles,
                  std::span<const match::CandidatePair> decisions,
                  const std::map<std::string, std::string>& language_by_title, const text::Tokenizer& tok) {
    std::unordered_map<std::string, const corpus::Article*> article_by_id;
    for (const auto& a : articles) article_by_id.emplace(a.id, &a);
    std::unordered_map<std::string, const detect::Teaser*> teaser_by_id;
    for (const auto& t : teasers) teaser_by_id.emplace(t.id, &t);

    Assembly out;
    std::unordered_map<std::string, std::vector<const corpus::Article*>> matched;
    for (const auto& d : decisions) {
        if (!teaser_by_id.contains(d.teaser_id))
            throw Error(Errc::dangling_reference, "decision references unknown teaser '" + d.teaser_id + "'");
        auto ait = article_by_id.find(d.article_id);
        if (ait == article_by_id.end())
            throw Error(Errc::dangling_reference, "decision references unknown article '" + d.article_id + "'");
        if (d.decision == match::Decision::undecided) ++out.dropped.undecided_pairs;
        if (d.decision != match::Decision::match) continue;
        auto& docs = matched[d.teaser_id];
        if (std::find(docs.begin(), docs.end(), ait->second) == docs.end()) docs.push_back(ait->second);
    }

    for (const auto& t : teasers) {
        auto it = matched.find(t.id);
        if (it == matched.end()) {
            out.dropped.teasers_without_match.push_back(t.id);
            continue;
        }
        auto docs = it->second;
        std::sort(docs.begin(), docs.end(), [](const corpus::Article* a, const corpus::Article* b) {
            return std::tie(a->first_page, a->first_order, a->id) < std::tie(b->first_page, b->first_order, b->id);
        });
        Sample s;
        s.id = t.id;
        s.summary = t.text;
        for (const auto* a : docs) {
            s.documents.push_back(a->full_text());
            s.document_ids.push_back(a->id);
        }
        s.is_multi_doc = s.documents.size() >= 2;
        s.length_category = text::length_category(s.summary, tok);
        s.shape = classify_shape(s.summary);
        s.issue_ref = t.issue_ref;
        if (auto lit = language_by_title.find(t.issue_ref.title_id); lit != language_by_title.end())
            s.language = lit->second;
        out.samples.push_back(std::move(s));
    }
    return out;
}

namespace {

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

std::size_t count_bullets(std::string_view text) {
    std::size_t n = 0;
    for (std::string_view marker : {"•", "▪", "●", "◦", "■"}) {
        for (std::size_t pos = text.find(marker); pos != std::string_view::npos; pos = text.find(marker, pos + 1)) ++n;
    }
    return n;
}

}  // namespace

std::size_t count_sentences(std::string_view text) {
    std::size_t count = 0;
    bool content = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (is_terminal(c)) {
            const bool boundary = i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n' ||
                                  text[i + 1] == '\t' || text[i + 1] == '\r';
            if (boundary) {
                if (content) ++count;
                content = false;
                continue;
            }
        }
        if (!std::isspace(static_cast<unsigned char>(c)) && !is_terminal(c)) content = true;
    }
    if (content) ++count;
    return count;
}

Shape classify_shape(std::string_view summary) {
    std::size_t lines = 0;
    std::size_t start = 0;
    while (start <= summary.size()) {
        std::size_t nl = summary.find('\n', start);
        if (nl == std::string_view::npos) nl = summary.size();
        if (!unicode::is_blank(summary.substr(start, nl - start))) ++lines;
        start = nl + 1;
    }
    if (lines >= 2 || count_bullets(summary) >= 2) return Shape::highlights;
    return count_sentences(summary) == 1 ? Shape::one_sentence : Shape::paragraph;
}

namespace {

struct Accum {
    std::array<double, 4> novel_sum{};
    std::array<std::size_t, 4> novel_n{};
    double compression_sum = 0.0;
    std::size_t count = 0;
    std::size_t multi = 0;

    void add(const Sample& s, const text::Tokenizer& tok) {
        const auto m = text::summary_metrics(s.summary, s.documents, tok);
        for (std::size_t k = 0; k < 4; ++k) {
            if (!std::isnan(m.novel_ngram[k])) {
                novel_sum[k] += m.novel_ngram[k];
                ++novel_n[k];
            }
        }
        compression_sum += m.compression;
        ++count;
        if (s.is_multi_doc) ++multi;
    }
    double novel(std::size_t k) const { return novel_n[k] ? novel_sum[k] / static_cast<double>(novel_n[k]) : 0.0; }
    double compression() const { return count ? compression_sum / static_cast<double>(count) : 0.0; }
    double multi_fraction() const { return count ? static_cast<double>(multi) / static_cast<double>(count) : 0.0; }
};

}  // namespace

Datacard build_datacard(std::span<const Sample> samples, const text::Tokenizer& tok) {
    if (samples.empty()) throw Error(Errc::empty_dataset, "cannot build a datacard for an empty dataset");
    Datacard d;
    std::set<std::string> languages;
    Accum acc;
    double single_text = 0, single_summary = 0, multi_text = 0, multi_summary = 0, cluster = 0;
    for (auto s : kShapes) d.shape_counts[s] = 0;
    for (auto c : text::kLengthCategories) d.length_counts[c] = 0;
    for (const auto& s : samples) {
        if (!s.language.empty()) languages.insert(s.language);
        ++d.shape_counts[s.shape];
        ++d.length_counts[s.length_category];
        acc.add(s, tok);
        std::size_t text_words = 0;
        for (const auto& doc : s.documents) text_words += tok.count(doc);
        const auto summary_words = static_cast<double>(tok.count(s.summary));
        if (s.is_multi_doc) {
            ++d.multi_doc.count;
            multi_text += static_cast<double>(text_words);
            multi_summary += summary_words;
            cluster += static_cast<double>(s.documents.size());
        } else {
            ++d.single_doc.count;
            single_text += static_cast<double>(text_words);
            single_summary += summary_words;
        }
    }
    d.languages.assign(languages.begin(), languages.end());
    d.size = samples.size();
    for (std::size_t k = 0; k < 4; ++k) d.novel_ngram[k] = acc.novel(k);
    d.compression = acc.compression();
    if (d.single_doc.count) {
        d.single_doc.avg_text_words = single_text / static_cast<double>(d.single_doc.count);
        d.single_doc.avg_summary_words = single_summary / static_cast<double>(d.single_doc.count);
    }
    if (d.multi_doc.count) {
        d.multi_doc.avg_text_words = multi_text / static_cast<double>(d.multi_doc.count);
        d.multi_doc.avg_summary_words = multi_summary / static_cast<double>(d.multi_doc.count);
        d.avg_cluster_size = cluster / static_cast<double>(d.multi_doc.count);
    }
    d.multi_doc_fraction = static_cast<double>(d.multi_doc.count) / static_cast<double>(d.size);
    return d;
}

json to_json(const Datacard& d) {
    json shapes = json::object();
    for (const auto& [s, n] : d.shape_counts) shapes[std::string(to_string(s))] = n;
    json lengths = json::object();
    for (const auto& [c, n] : d.length_counts) lengths[std::string(text::to_string(c))] = n;
    json novel = json::object();
    for (std::size_t k = 0; k < 4; ++k) novel[std::to_string(k + 1)] = d.novel_ngram[k];
    auto split = [](const SplitStats& s) {
        return json{{"count", s.count}, {"avg_text_words", s.avg_text_words}, {"avg_summary_words", s.avg_summary_words}};
    };
    return {{"languages", d.languages},
            {"shape_counts", shapes},
            {"length_counts", lengths},
            {"domain", d.domain},
            {"size", d.size},
            {"novel_ngram", novel},
            {"compression", d.compression},
            {"single_doc", split(d.single_doc)},
            {"multi_doc", split(d.multi_doc)},
            {"multi_doc_fraction", d.multi_doc_fraction},
            {"avg_cluster_size", d.avg_cluster_size}};
}

std::string format_datacard(const Datacard& d) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "Summarization data card\n";
    os << "  Languages: ";
    for (std::size_t i = 0; i < d.languages.size(); ++i) os << (i ? ", " : "") << d.languages[i];
    os << "\n  Summary shape: Paragraph: " << d.shape_counts.at(Shape::paragraph)
       << "; One-Sentence: " << d.shape_counts.at(Shape::one_sentence)
       << "; Highlights: " << d.shape_counts.at(Shape::highlights) << "\n";
    os << "  Summary distribution by length:\n"
       << "    0-25: " << d.length_counts.at(text::LengthCategory::c0_25) << "\n"
       << "    25-50: " << d.length_counts.at(text::LengthCategory::c25_50) << "\n"
       << "    50-100: " << d.length_counts.at(text::LengthCategory::c50_100) << "\n"
       << "    >100: " << d.length_counts.at(text::LengthCategory::c100_plus) << "\n";
    os << "  Domain: " << d.domain << "\n  Size: " << d.size << "\n";
    os << "  Abstraction level:";
    for (std::size_t k = 0; k < 4; ++k) os << " " << k + 1 << "-gram ratio: " << d.novel_ngram[k] << ";";
    os << "\n  Compression rate: " << d.compression << "\n\n";
    os << "  Statistic                     Single-Doc   Multi-Doc\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "  # Teasers                     %10zu  %10zu\n", d.single_doc.count, d.multi_doc.count);
    os << buf;
    std::snprintf(buf, sizeof buf, "  Avg. text length (words)      %10.1f  %10.1f\n", d.single_doc.avg_text_words,
                  d.multi_doc.avg_text_words);
    os << buf;
    std::snprintf(buf, sizeof buf, "  Avg. summary length (words)   %10.1f  %10.1f\n", d.single_doc.avg_summary_words,
                  d.multi_doc.avg_summary_words);
    os << buf;
    os << "  Average number of articles in cluster: " << d.avg_cluster_size << "\n";
    return os.str();
}

json corpus_table_json(std::span<const Sample> samples, const text::Tokenizer& tok) {
    std::map<std::string, Accum> rows;
    for (const auto& s : samples) rows[s.language.empty() ? "und" : s.language].add(s, tok);
    json out = json::array();
    for (const auto& [lang, acc] : rows) {
        out.push_back({{"language", lang},
                       {"samples", acc.count},
                       {"compression", acc.compression()},
                       {"novel_ngram", {{"1", acc.novel(0)}, {"2", acc.novel(1)}, {"3", acc.novel(2)}, {"4", acc.novel(3)}}},
                       {"multi_doc_fraction", acc.multi_fraction()}});
    }
    return out;
}

std::string format_corpus_table(std::span<const Sample> samples, const text::Tokenizer& tok) {
    std::ostringstream os;
    os << "Language    Samples  Comp.   Novel-1  Novel-2  Novel-3  Novel-4  %Multi-doc\n";
    for (const auto& row : corpus_table_json(samples, tok)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-10s  %7zu  %5.2f   %7.2f  %7.2f  %7.2f  %7.2f  %9.0f%%\n",
                      row["language"].get<std::string>().c_str(), row["samples"].get<std::size_t>(),
                      row["compression"].get<double>(), row["novel_ngram"]["1"].get<double>(),
                      row["novel_ngram"]["2"].get<double>(), row["novel_ngram"]["3"].get<double>(),
                      row["novel_ngram"]["4"].get<double>(), 100.0 * row["multi_doc_fraction"].get<double>());
        os << buf;
    }
    return os.str();
}

ExportResult export_samples(std::span<const Sample> samples, const std::filesystem::path& dir,
                            const ExportOptions& options, llm::LlmClient* client, const llm::PromptLibrary* prompts) {
    ExportResult result;
    std::filesystem::create_directories(dir);
    auto write = [&](const std::filesystem::path& p, const std::vector<json>& records) {
        try {
            jsonl::write(p, records);
        } catch (const Error& e) {
            throw Error(Errc::io_error, e.what());
        }
        result.files.push_back(p);
    };

    std::vector<json> manifest;
    for (const auto& s : samples) manifest.push_back(to_manifest_json(s));
    if (!options.manifest_only) {
        std::vector<json> full;
        for (const auto& s : samples) full.push_back(to_json(s));
        write(dir / "samples.jsonl", full);
    }
    write(dir / "manifest.jsonl", manifest);

    if (options.with_ocr_fix) {
        if (!client) throw Error(Errc::invalid_argument, "OCR-corrected export needs an LLM client");
        const llm::PromptLibrary defaults = llm::PromptLibrary::defaults();
        const llm::PromptLibrary& lib = prompts ? *prompts : defaults;
        std::vector<json> corrected;
        for (const auto& s : samples) {
            Sample c = s;
            const std::string lang = s.language.empty() ? "the original language" : s.language;
            auto fix = [&](std::string& text, const std::string& what) {
                auto r = llm::ocr_post_correct(*client, lib, text, lang);
                if (r.warning) result.warnings.push_back(s.id + " " + what + ": " + *r.warning);
                text = std::move(r.text);
            };
            fix(c.summary, "summary");
            for (std::size_t i = 0; i < c.documents.size(); ++i) fix(c.documents[i], c.document_ids[i]);
            corrected.push_back(to_json(c));
        }
        write(dir / "samples.corrected.jsonl", corrected);
    }
    return result;
}

std::vector<Sample> import_samples(const std::filesystem::path& path) {
    std::vector<Sample> out;
    for (const auto& j : jsonl::read(path)) out.push_back(sample_from_json(j));
    return out;
}

}  // namespace frontpage::dataset
