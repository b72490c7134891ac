#include "frontpage/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "frontpage/agreement.hpp"
#include "frontpage/annotation_service.hpp"
#include "frontpage/corpus.hpp"
#include "frontpage/dataset.hpp"
#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"
#include "frontpage/llm_client.hpp"
#include "frontpage/matcher.hpp"
#include "frontpage/teaser_detect.hpp"
#include "frontpage/text_metrics.hpp"
#include "frontpage/unicode.hpp"

namespace frontpage::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fixed workspace layout; every subcommand reads and writes only these paths
// plus the files named on its command line.
struct Workspace {
    fs::path root;

    fs::path issues() const { return root / "issues"; }
    fs::path articles_file() const { return issues() / "articles.jsonl"; }
    fs::path teasers_file() const { return root / "teasers" / "teasers.jsonl"; }
    fs::path pairs_file() const { return root / "pairs" / "pairs.jsonl"; }
    fs::path samples_file() const { return root / "dataset" / "samples.jsonl"; }
    fs::path export_dir() const { return root / "dataset" / "export"; }
    fs::path reports() const { return root / "reports"; }
    fs::path calibration_file() const { return reports() / "calibration.json"; }
    fs::path annotation_dir() const { return root / "annotation"; }
};

class WorkspaceLock {
public:
    explicit WorkspaceLock(const fs::path& root) {
        fs::create_directories(root);
        const auto path = root / ".lock";
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) throw Error(Errc::io_error, "cannot open lock file " + path.string());
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw Error(Errc::io_error, "workspace " + root.string() + " is in use by another process");
        }
    }
    ~WorkspaceLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    int fd_ = -1;
};

void require(const fs::path& path, std::string_view produced_by) {
    if (!fs::exists(path))
        throw Error(Errc::io_error, "missing " + path.filename().string() + "; run `" + std::string(produced_by) + "` first");
}

std::vector<fs::path> json_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(Errc::io_error, "not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

void write_report(const Workspace& ws, const std::string& name, const json& record, const std::string& table) {
    jsonl::write_document(ws.reports() / (name + ".json"), record);
    jsonl::write_text(ws.reports() / (name + ".txt"), table);
}

std::vector<corpus::Issue> load_issues(const Workspace& ws) {
    std::vector<corpus::Issue> out;
    if (!fs::exists(ws.issues())) return out;
    for (const auto& p : json_files(ws.issues())) out.push_back(corpus::ingest_issue(p, true).issue);
    return out;
}

std::vector<corpus::Article> load_articles(const Workspace& ws) {
    require(ws.articles_file(), "ingest");
    std::vector<corpus::Article> out;
    for (const auto& j : jsonl::read(ws.articles_file())) out.push_back(corpus::article_from_json(j));
    return out;
}

std::vector<detect::Teaser> load_teasers(const Workspace& ws) {
    require(ws.teasers_file(), "detect");
    std::vector<detect::Teaser> out;
    for (const auto& j : jsonl::read(ws.teasers_file())) out.push_back(detect::teaser_from_json(j));
    return out;
}

std::vector<match::CandidatePair> load_pairs(const fs::path& path) {
    std::vector<match::CandidatePair> out;
    for (const auto& j : jsonl::read(path)) out.push_back(match::pair_from_json(j));
    return out;
}

std::vector<match::CandidatePair> load_pairs(const Workspace& ws) {
    require(ws.pairs_file(), "match");
    return load_pairs(ws.pairs_file());
}

std::vector<dataset::Sample> load_samples(const Workspace& ws) {
    require(ws.samples_file(), "assemble");
    return dataset::import_samples(ws.samples_file());
}

std::string format_fixed(double v, int precision = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

std::string language_name(std::string_view tag) {
    static const std::map<std::string, std::string, std::less<>> names{
        {"el", "Greek"},   {"en", "English"},   {"et", "Estonian"}, {"he", "Hebrew"},
        {"is", "Icelandic"}, {"it", "Italian"}, {"no", "Norwegian"}, {"nb", "Norwegian"},
        {"pl", "Polish"}};
    const auto base = tag.substr(0, tag.find('-'));
    auto it = names.find(base);
    return it == names.end() ? std::string(tag) : it->second;
}

std::unique_ptr<llm::LlmClient> make_llm_client(const std::optional<std::string>& cache, std::size_t concurrency) {
    llm::ClientConfig config;
    config.concurrency = std::max<std::size_t>(1, concurrency);
    if (auto env = llm::endpoint_from_env(); env && !env->model.empty()) config.model = env->model;
    std::optional<fs::path> cache_path;
    if (cache) cache_path = fs::path(*cache);
    return llm::LlmClient::from_environment(cache_path, config);
}

llm::PromptLibrary load_prompts(const std::optional<std::string>& dir) {
    return dir ? llm::PromptLibrary::load(*dir) : llm::PromptLibrary::defaults();
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
    std::string input;
    bool strict = false;
};

int cmd_ingest(const Workspace& ws, const IngestArgs& a, std::ostream& out) {
    const auto files = json_files(a.input);
    std::vector<corpus::Issue> issues;
    std::vector<std::string> warnings;
    std::set<std::string> keys;
    for (const auto& f : files) {
        auto r = corpus::ingest_issue(f, a.strict);
        if (!keys.insert(r.issue.ref().key()).second)
            throw Error(Errc::schema_violation, "issue " + r.issue.ref().key() + " appears twice in the input");
        for (auto& w : r.warnings) warnings.push_back(f.filename().string() + ": " + w);
        issues.push_back(std::move(r.issue));
    }

    fs::remove_all(ws.issues());
    fs::create_directories(ws.issues());
    std::vector<json> articles;
    std::size_t pages = 0, blocks = 0;
    for (const auto& issue : issues) {
        corpus::write_issue(ws.issues() / (issue.title_id + "_" + issue.date + ".json"), issue);
        for (const auto& a : corpus::group_articles(issue)) articles.push_back(corpus::to_json(a));
        pages += issue.pages.size();
        blocks += issue.block_count();
    }
    jsonl::write(ws.articles_file(), articles);

    const json report{{"issues", issues.size()},
                      {"pages", pages},
                      {"blocks", blocks},
                      {"articles", articles.size()},
                      {"strict", a.strict},
                      {"warnings", warnings}};
    std::ostringstream t;
    t << "Ingested " << issues.size() << " issues: " << pages << " pages, " << blocks << " blocks, "
      << articles.size() << " articles\n";
    for (const auto& w : warnings) t << "warning: " << w << "\n";
    write_report(ws, "ingest", report, t.str());
    out << t.str();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// detect

struct DetectArgs {
    std::string profiles;
    std::optional<std::string> gold;
};

int cmd_detect(const Workspace& ws, const DetectArgs& a, std::ostream& out) {
    std::map<std::string, detect::LanguageProfile> profiles;
    for (const auto& f : json_files(a.profiles)) {
        auto p = detect::load_profile(f);
        profiles.insert_or_assign(p.title_id, std::move(p));
    }
    const auto issues = load_issues(ws);
    std::vector<detect::Teaser> teasers;
    std::vector<std::string> warnings;
    json per_issue = json::array();
    for (const auto& issue : issues) {
        auto it = profiles.find(issue.title_id);
        if (it == profiles.end()) {
            warnings.push_back("no language profile for title '" + issue.title_id + "'; " + issue.ref().key() +
                               " skipped");
            continue;
        }
        auto found = detect::detect_teasers(issue, it->second);
        per_issue.push_back({{"issue", issue.ref().key()}, {"teasers", found.size()}});
        teasers.insert(teasers.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
    }
    std::vector<json> records;
    for (const auto& t : teasers) records.push_back(detect::to_json(t));
    jsonl::write(ws.teasers_file(), records);

    json report{{"issues", issues.size()}, {"teasers", teasers.size()}, {"per_issue", per_issue}, {"warnings", warnings}};
    std::ostringstream t;
    if (issues.empty()) t << "No issues in workspace; 0 teasers detected\n";
    else t << "Detected " << teasers.size() << " teasers in " << issues.size() << " issues\n";
    for (const auto& w : warnings) t << "warning: " << w << "\n";
    if (a.gold) {
        const auto gold = detect::load_detection_gold(*a.gold);
        const auto eval = detect::evaluate_detection(teasers, gold);
        report["evaluation"] = detect::to_json(eval);
        t << "\n" << detect::format_table(eval);
    }
    write_report(ws, "detection", report, t.str());
    out << t.str();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// match / calibrate

struct MatchArgs {
    std::string backend = "tfidf";
    std::optional<double> threshold;
    std::optional<std::string> gold;
    std::optional<std::string> vectors;
    std::optional<std::string> embedding_url;
    std::optional<std::string> cache;
    std::optional<std::string> prompts;
    std::size_t concurrency = 4;
};

std::vector<match::CandidatePair> score_tfidf(std::span<const match::CandidatePair> candidates,
                                              std::span<const detect::Teaser> teasers,
                                              std::span<const corpus::Article> articles,
                                              const match::TextIndex& texts) {
    const auto model = match::fit_corpus_model(teasers, articles);
    // Threshold 0 keeps every score; decisions are re-applied afterwards.
    return match::decide_tfidf(candidates, model, texts, 0.0);
}

std::pair<double, std::string> resolve_threshold(const Workspace& ws, const MatchArgs& a, match::Backend backend) {
    if (a.threshold) {
        if (*a.threshold < 0.0 || *a.threshold > 1.0) throw Error(Errc::invalid_argument, "threshold must lie in [0,1]");
        return {*a.threshold, "flag"};
    }
    if (fs::exists(ws.calibration_file())) {
        const auto cal = jsonl::read_document(ws.calibration_file());
        if (cal.value("backend", std::string()) == match::to_string(backend))
            return {cal.at("threshold").get<double>(), "calibration"};
    }
    throw Error(Errc::invalid_argument, "no threshold for backend '" + std::string(match::to_string(backend)) +
                                            "': pass --threshold or run `calibrate` first");
}

int cmd_match(const Workspace& ws, const MatchArgs& a, std::ostream& out) {
    const auto backend = match::backend_from_string(a.backend);
    const auto teasers = load_teasers(ws);
    const auto articles = load_articles(ws);
    const auto texts = match::TextIndex::build(teasers, articles);
    const auto candidates = match::build_candidates(teasers, articles);

    match::DecideOutcome outcome;
    json report{{"backend", match::to_string(backend)}, {"candidates", candidates.size()}};
    switch (backend) {
        case match::Backend::tfidf: {
            const auto [threshold, source] = resolve_threshold(ws, a, backend);
            outcome.pairs = match::apply_threshold(score_tfidf(candidates, teasers, articles, texts), threshold);
            report["threshold"] = threshold;
            report["threshold_source"] = source;
            break;
        }
        case match::Backend::embedding: {
            const auto [threshold, source] = resolve_threshold(ws, a, backend);
            std::unique_ptr<match::EmbeddingProvider> provider;
            if (a.vectors) {
                provider = std::make_unique<match::FileEmbeddingProvider>(*a.vectors);
            } else if (a.embedding_url) {
                const auto env = llm::endpoint_from_env();
                provider = std::make_unique<match::HttpEmbeddingProvider>(
                    *a.embedding_url, env ? env->api_key : std::string(), env ? env->model : std::string());
            } else {
                throw Error(Errc::provider_unavailable, "embedding backend needs --vectors or --embedding-url");
            }
            outcome = match::decide_embedding(candidates, *provider, texts, threshold);
            report["threshold"] = threshold;
            report["threshold_source"] = source;
            break;
        }
        case match::Backend::zero_shot: {
            auto client = make_llm_client(a.cache, a.concurrency);
            outcome = match::decide_zero_shot(candidates, *client, load_prompts(a.prompts), texts);
            break;
        }
    }
    if (outcome.fatal) {
        std::string msg = "every " + std::string(match::to_string(backend)) + " call failed";
        if (!outcome.errors.empty()) msg += "; first: " + outcome.errors.front();
        throw Error(*outcome.fatal, msg);
    }

    std::vector<json> records;
    std::size_t n_match = 0, n_no = 0, n_undecided = 0;
    for (const auto& p : outcome.pairs) {
        records.push_back(match::to_json(p));
        if (p.decision == match::Decision::match) ++n_match;
        else if (p.decision == match::Decision::no_match) ++n_no;
        else ++n_undecided;
    }
    jsonl::write(ws.pairs_file(), records);

    report["decisions"] = {{"match", n_match}, {"no_match", n_no}, {"undecided", n_undecided}};
    report["failures"] = outcome.failures;
    report["errors"] = outcome.errors;
    std::ostringstream t;
    t << "Matched " << candidates.size() << " candidate pairs with " << match::to_string(backend);
    if (report.contains("threshold")) t << " at threshold " << format_fixed(report["threshold"].get<double>(), 4);
    t << ": " << n_match << " match, " << n_no << " no match, " << n_undecided << " undecided\n";
    for (const auto& e : outcome.errors) t << "warning: " << e << "\n";
    if (a.gold) {
        const auto gold = match::load_gold(*a.gold);
        const auto eval = match::evaluate_matching(outcome.pairs, gold);
        report["evaluation"] = match::to_json(eval);
        std::string label(match::to_string(backend));
        if (backend == match::Backend::tfidf) label = "TF-IDF";
        else if (backend == match::Backend::zero_shot) label = "Zero-Shot";
        else label = "Embedding";
        t << "\n" << match::format_table({{label, eval}});
    }
    write_report(ws, "matching", report, t.str());
    out << t.str();
    return kExitOk;
}

struct CalibrateArgs {
    std::string gold;
    std::optional<std::string> pairs;
};

int cmd_calibrate(const Workspace& ws, const CalibrateArgs& a, std::ostream& out) {
    std::vector<match::CandidatePair> scored;
    match::Backend backend = match::Backend::tfidf;
    if (a.pairs) {
        scored = load_pairs(*a.pairs);
        if (!scored.empty()) backend = scored.front().backend;
    } else {
        const auto teasers = load_teasers(ws);
        const auto articles = load_articles(ws);
        const auto texts = match::TextIndex::build(teasers, articles);
        scored = score_tfidf(match::build_candidates(teasers, articles), teasers, articles, texts);
    }
    const auto gold = match::load_gold(a.gold);
    const auto joined = match::join_scores(scored, gold);
    const auto result = match::calibrate_threshold(joined);

    json report = match::to_json(result);
    report["backend"] = match::to_string(backend);
    report["labeled_pairs"] = joined.size();
    std::ostringstream t;
    t << "Calibrated " << match::to_string(backend) << " threshold on " << joined.size() << " labeled pairs\n"
      << "  threshold  " << format_fixed(result.threshold, 6) << "\n"
      << "  precision  " << format_fixed(result.precision) << "\n"
      << "  recall     " << format_fixed(result.recall) << "\n"
      << "  F1         " << format_fixed(result.f1) << "\n"
      << "  accuracy   " << format_fixed(result.accuracy) << "\n";
    write_report(ws, "calibration", report, t.str());
    out << t.str();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// assemble / stats / export

int cmd_assemble(const Workspace& ws, std::ostream& out) {
    const auto teasers = load_teasers(ws);
    const auto articles = load_articles(ws);
    const auto pairs = load_pairs(ws);
    std::map<std::string, std::string> language_by_title;
    for (const auto& issue : load_issues(ws)) language_by_title.emplace(issue.title_id, issue.language);

    const auto assembly = dataset::assemble(teasers, articles, pairs, language_by_title);
    std::vector<json> records;
    std::size_t multi = 0;
    for (const auto& s : assembly.samples) {
        records.push_back(dataset::to_json(s));
        if (s.is_multi_doc) ++multi;
    }
    jsonl::write(ws.samples_file(), records);

    const json report{{"samples", assembly.samples.size()},
                      {"multi_doc", multi},
                      {"teasers_without_match", assembly.dropped.teasers_without_match},
                      {"undecided_pairs", assembly.dropped.undecided_pairs}};
    std::ostringstream t;
    t << "Assembled " << assembly.samples.size() << " samples (" << multi << " multi-document); "
      << assembly.dropped.teasers_without_match.size() << " teasers without a match, "
      << assembly.dropped.undecided_pairs << " undecided pairs\n";
    write_report(ws, "assembly", report, t.str());
    out << t.str();
    return kExitOk;
}

int cmd_stats(const Workspace& ws, std::ostream& out) {
    const auto samples = load_samples(ws);
    const auto table = dataset::format_corpus_table(samples);
    write_report(ws, "corpus_table", dataset::corpus_table_json(samples), table);
    const auto card = dataset::build_datacard(samples);
    const auto card_text = dataset::format_datacard(card);
    write_report(ws, "datacard", dataset::to_json(card), card_text);
    out << table << "\n" << card_text;
    return kExitOk;
}

struct ExportArgs {
    bool manifest_only = false;
    bool ocr_fix = false;
    std::optional<std::string> cache;
    std::optional<std::string> prompts;
    std::size_t concurrency = 4;
};

int cmd_export(const Workspace& ws, const ExportArgs& a, std::ostream& out) {
    const auto samples = load_samples(ws);
    dataset::ExportOptions opt{a.manifest_only, a.ocr_fix};
    std::unique_ptr<llm::LlmClient> client;
    if (a.ocr_fix) client = make_llm_client(a.cache, a.concurrency);
    const auto prompts = load_prompts(a.prompts);
    fs::remove_all(ws.export_dir());
    const auto result = dataset::export_samples(samples, ws.export_dir(), opt, client.get(), &prompts);
    json files = json::array();
    for (const auto& f : result.files) files.push_back(f.filename().string());
    const json report{{"samples", samples.size()}, {"files", files}, {"warnings", result.warnings}};
    std::ostringstream t;
    t << "Exported " << samples.size() << " samples:";
    for (const auto& f : result.files) t << " " << f.filename().string();
    t << "\n";
    for (const auto& w : result.warnings) t << "warning: " << w << "\n";
    write_report(ws, "export", report, t.str());
    out << t.str();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// generate / eval

struct GenerateArgs {
    std::string out;
    std::size_t shots = llm::kDefaultShots;
    std::optional<std::string> cache;
    std::optional<std::string> prompts;
    std::size_t concurrency = 4;
};

std::string join_documents(const dataset::Sample& s) {
    std::string text;
    for (std::size_t i = 0; i < s.documents.size(); ++i) {
        if (i) text += "\n\n";
        text += s.documents[i];
    }
    return text;
}

int cmd_generate(const Workspace& ws, const GenerateArgs& a, std::ostream& out) {
    const auto samples = load_samples(ws);
    const auto prompts = load_prompts(a.prompts);
    auto client = make_llm_client(a.cache, a.concurrency);
    std::vector<std::string> batch;
    for (const auto& s : samples)
        batch.push_back(prompts.render(llm::Task::summarize,
                                       {{"language", language_name(s.language)}, {"text", join_documents(s)}}, a.shots));
    const auto results = client->complete_batch(batch);
    std::vector<json> records;
    std::size_t failed = 0;
    std::optional<Errc> first_error;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!results[i].text) {
            ++failed;
            if (!first_error && results[i].error_code) first_error = static_cast<Errc>(*results[i].error_code);
            continue;
        }
        records.push_back({{"id", samples[i].id}, {"summary", unicode::normalize_nfc(*results[i].text)}});
    }
    if (!samples.empty() && failed == samples.size())
        throw Error(first_error.value_or(Errc::endpoint_unavailable), "no summary could be generated");
    jsonl::write(a.out, records);
    out << "Generated " << records.size() << " summaries (" << a.shots << "-shot); " << failed << " failed\n";
    return kExitOk;
}

struct EvalArgs {
    std::string generated;
    std::optional<std::string> name;
    bool judge = false;
    std::optional<std::string> cache;
    std::optional<std::string> prompts;
    std::size_t concurrency = 4;
};

int cmd_eval(const Workspace& ws, const EvalArgs& a, std::ostream& out) {
    const auto samples = load_samples(ws);
    std::map<std::string, const dataset::Sample*> by_id;
    for (const auto& s : samples) by_id.emplace(s.id, &s);

    struct Item {
        const dataset::Sample* sample;
        std::string candidate;
    };
    std::vector<Item> items;
    for (const auto& j : jsonl::read(a.generated)) {
        const auto id = j.at("id").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(Errc::dangling_reference, "generated summary for unknown sample '" + id + "'");
        items.push_back({it->second, j.at("summary").get<std::string>()});
    }
    if (items.empty()) throw Error(Errc::empty_input, "no generated summaries in " + a.generated);

    double r1 = 0, r2 = 0, rl = 0;
    std::size_t n1 = 0, n2 = 0, nl = 0, skipped = 0;
    for (const auto& item : items) {
        const auto& ref = item.sample->summary;
        try {
            r1 += text::rouge_n(ref, item.candidate, 1).f1;
            ++n1;
            rl += text::rouge_l(ref, item.candidate).f1;
            ++nl;
            r2 += text::rouge_n(ref, item.candidate, 2).f1;
            ++n2;
        } catch (const Error&) {
            ++skipped;
        }
    }
    auto mean = [](double sum, std::size_t n) { return n ? json(sum / static_cast<double>(n)) : json(nullptr); };
    const std::string name = a.name.value_or(fs::path(a.generated).stem().string());
    json row{{"model", name},
             {"samples", items.size()},
             {"rouge_1", mean(r1, n1)},
             {"rouge_2", mean(r2, n2)},
             {"rouge_l", mean(rl, nl)},
             {"rouge_skipped", skipped}};

    std::vector<std::string> warnings;
    if (a.judge) {
        auto client = make_llm_client(a.cache, a.concurrency);
        const auto prompts = load_prompts(a.prompts);
        for (auto dim : {llm::JudgeDimension::coherence, llm::JudgeDimension::consistency, llm::JudgeDimension::coverage}) {
            std::vector<std::string> batch;
            for (const auto& item : items) {
                llm::SlotMap slots;
                if (dim == llm::JudgeDimension::coverage) {
                    slots = {{"reference", item.sample->summary}, {"candidate", item.candidate}};
                } else {
                    slots = {{"article", join_documents(*item.sample)}, {"summary", item.candidate}};
                }
                batch.push_back(prompts.render(llm::judge_task(dim), slots));
            }
            const auto results = client->complete_batch(batch);
            double sum = 0;
            std::size_t n = 0;
            std::optional<Errc> first_error;
            for (std::size_t i = 0; i < results.size(); ++i) {
                const std::string where = items[i].sample->id + " " + std::string(llm::to_string(dim));
                if (!results[i].text) {
                    if (!first_error && results[i].error_code) first_error = static_cast<Errc>(*results[i].error_code);
                    warnings.push_back(where + ": " + results[i].error.value_or("error"));
                    continue;
                }
                try {
                    sum += llm::parse_judge(*results[i].text);
                    ++n;
                } catch (const Error& e) {
                    warnings.push_back(where + ": " + e.what());
                }
            }
            if (n == 0 && first_error) throw Error(*first_error, "every judge call failed");
            row[std::string(llm::to_string(dim))] = mean(sum, n);
        }
    }

    const json report{{"rows", json::array({row})}, {"warnings", warnings}};
    auto cell = [](const json& v, int precision) { return v.is_null() ? std::string("-") : format_fixed(v.get<double>(), precision); };
    std::ostringstream t;
    t << "Model                 R-1     R-2     R-L";
    if (a.judge) t << "   Coherence  Consistency  Coverage";
    t << "\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-20s %6s  %6s  %6s", name.c_str(), cell(row["rouge_1"], 3).c_str(),
                  cell(row["rouge_2"], 3).c_str(), cell(row["rouge_l"], 3).c_str());
    t << buf;
    if (a.judge) {
        std::snprintf(buf, sizeof buf, "   %9s  %11s  %8s", cell(row["coherence"], 2).c_str(),
                      cell(row["consistency"], 2).c_str(), cell(row["coverage"], 2).c_str());
        t << buf;
    }
    t << "\n";
    for (const auto& w : warnings) t << "warning: " << w << "\n";
    write_report(ws, "eval_" + name, report, t.str());
    out << t.str();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// agree

int cmd_agree(const Workspace& ws, const std::string& records_path, std::ostream& out) {
    const auto records = agreement::load_records(records_path);
    json report;
    std::ostringstream t;
    try {
        const auto m = agreement::binary_confusion(records);
        const double k = agreement::cohens_kappa(m);
        report["kappa"] = {{"available", true}, {"value", k}, {"confusion", {{"a", m.a}, {"b", m.b}, {"c", m.c}, {"d", m.d}}}};
        t << "Cohen's kappa (match, " << m.total() << " shared items): " << format_fixed(k, 4) << "\n";
    } catch (const Error& e) {
        report["kappa"] = {{"available", false}, {"reason", e.what()}};
        t << "Cohen's kappa: unavailable (" << e.what() << ")\n";
    }
    const auto alpha = agreement::krippendorff_alpha(records);
    report["alpha"] = agreement::to_json(alpha);
    if (alpha.pooled) t << "Krippendorff's alpha (interval, pooled): " << format_fixed(*alpha.pooled, 4) << "\n";
    else t << "Krippendorff's alpha: unavailable\n";
    for (const auto& [d, v] : alpha.per_dimension)
        t << "  " << agreement::to_string(d) << ": " << (v ? format_fixed(*v, 4) : std::string("unavailable")) << "\n";
    if (alpha.mean_of_dimensions) t << "  mean of dimensions: " << format_fixed(*alpha.mean_of_dimensions, 4) << "\n";
    for (const auto& n : alpha.notes) t << "note: " << n << "\n";
    write_report(ws, "agreement", report, t.str());
    out << t.str();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
    int port = annotation::kDefaultPort;
    std::string host = "127.0.0.1";
    std::optional<std::string> ui_dir;
    std::optional<std::string> enqueue;
    double overlap = 0.0;
};

annotation::HttpServer* g_server = nullptr;

extern "C" void handle_stop_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const Workspace& ws, const ServeArgs& a, std::ostream& out) {
    annotation::Service service(ws.annotation_dir());
    if (a.enqueue) {
        std::vector<annotation::QueueItem> items;
        annotation::EnqueueOptions opt;
        opt.overlap_fraction = a.overlap;
        agreement::AnnotationTask kind;
        if (*a.enqueue == "match") {
            kind = agreement::AnnotationTask::match_binary;
            const auto teasers = load_teasers(ws);
            const auto articles = load_articles(ws);
            const auto pairs = load_pairs(ws);
            items = annotation::items_from_pairs(pairs, match::TextIndex::build(teasers, articles));
        } else {
            kind = agreement::AnnotationTask::quality_1_5;
            const auto samples = load_samples(ws);
            items = annotation::items_from_samples(samples);
        }
        try {
            out << "Queued " << service.enqueue(items, kind, opt) << " tasks\n";
        } catch (const Error& e) {
            if (e.code() != Errc::empty_input) throw;
            out << "Nothing new to queue\n";
        }
    }
    std::optional<fs::path> ui;
    if (a.ui_dir) ui = fs::path(*a.ui_dir);
    annotation::HttpServer server(service, ui);
    const int port = server.bind(a.host, a.port);
    out << "Annotation service listening on http://" << a.host << ":" << port << "\n" << std::flush;
    g_server = &server;
    std::signal(SIGINT, handle_stop_signal);
    std::signal(SIGTERM, handle_stop_signal);
    server.listen();
    g_server = nullptr;
    return kExitOk;
}

void emit_error(std::ostream& err, std::string_view code, std::string_view message) {
    err << json{{"error", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Front-page teaser summarization dataset toolkit", "frontpage"};
    app.require_subcommand(1);
    std::string workspace = "workspace";
    app.add_option("-w,--workspace", workspace, "Workspace directory")->capture_default_str();

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Validate a corpus directory and load it into the workspace");
    c_ingest->add_option("--input", ingest.input, "Directory of canonical issue files")->required();
    c_ingest->add_flag("--strict", ingest.strict, "Abort on any schema violation");

    DetectArgs detect;
    auto* c_detect = app.add_subcommand("detect", "Detect front-page teasers");
    c_detect->add_option("--profiles", detect.profiles, "Directory of language profiles")->required();
    c_detect->add_option("--gold", detect.gold, "Gold block labels for evaluation");

    MatchArgs match;
    auto* c_match = app.add_subcommand("match", "Match teasers to articles");
    c_match->add_option("--backend", match.backend, "tfidf | embedding | zero-shot")
        ->check(CLI::IsMember({"tfidf", "embedding", "zero-shot"}))
        ->capture_default_str();
    c_match->add_option("--threshold", match.threshold, "Similarity threshold in [0,1]");
    c_match->add_option("--gold", match.gold, "Gold pair labels for evaluation");
    c_match->add_option("--vectors", match.vectors, "Precomputed embedding vectors (JSONL)");
    c_match->add_option("--embedding-url", match.embedding_url, "Embedding endpoint URL");
    c_match->add_option("--cache", match.cache, "Replay cache file");
    c_match->add_option("--prompts", match.prompts, "Prompt template directory");
    c_match->add_option("--concurrency", match.concurrency, "Concurrent model calls")->check(CLI::PositiveNumber);

    CalibrateArgs calibrate;
    auto* c_calibrate = app.add_subcommand("calibrate", "Choose the max-F1 similarity threshold from labeled pairs");
    c_calibrate->add_option("--gold", calibrate.gold, "Labeled pairs or annotation export")->required();
    c_calibrate->add_option("--pairs", calibrate.pairs, "Scored pairs (defaults to TF-IDF over the workspace)");

    auto* c_assemble = app.add_subcommand("assemble", "Build dataset samples from match decisions");
    auto* c_stats = app.add_subcommand("stats", "Corpus table and datacard");

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "Score generated summaries against teaser references");
    c_eval->add_option("--generated", eval.generated, "Generated summaries (JSONL of {id, summary})")->required();
    c_eval->add_option("--name", eval.name, "Row label (defaults to the file stem)");
    c_eval->add_flag("--judge", eval.judge, "Add LLM-as-judge coherence, consistency and coverage");
    c_eval->add_option("--cache", eval.cache, "Replay cache file");
    c_eval->add_option("--prompts", eval.prompts, "Prompt template directory");
    c_eval->add_option("--concurrency", eval.concurrency, "Concurrent model calls")->check(CLI::PositiveNumber);

    GenerateArgs generate;
    auto* c_generate = app.add_subcommand("generate", "Generate summaries with k-shot prompting");
    c_generate->add_option("--out", generate.out, "Output JSONL")->required();
    c_generate->add_option("--shots", generate.shots, "Number of exemplars")->capture_default_str();
    c_generate->add_option("--cache", generate.cache, "Replay cache file");
    c_generate->add_option("--prompts", generate.prompts, "Prompt template directory");
    c_generate->add_option("--concurrency", generate.concurrency, "Concurrent model calls")->check(CLI::PositiveNumber);

    std::string records;
    auto* c_agree = app.add_subcommand("agree", "Inter-annotator agreement");
    c_agree->add_option("--records", records, "Annotation records (JSONL)")->required();

    ServeArgs serve;
    auto* c_serve = app.add_subcommand("serve", "Run the annotation service");
    c_serve->add_option("--port", serve.port, "TCP port")->capture_default_str();
    c_serve->add_option("--host", serve.host, "Bind address")->capture_default_str();
    c_serve->add_option("--ui-dir", serve.ui_dir, "Static UI bundle directory");
    c_serve->add_option("--enqueue", serve.enqueue, "Queue workspace items first: match | quality")
        ->check(CLI::IsMember({"match", "quality"}));
    c_serve->add_option("--overlap", serve.overlap, "Fraction of items given to a second annotator")
        ->check(CLI::Range(0.0, 1.0));

    ExportArgs exp;
    auto* c_export = app.add_subcommand("export", "Export the dataset");
    c_export->add_flag("--manifest-only", exp.manifest_only, "Write ids and metadata without text");
    c_export->add_flag("--ocr-fix", exp.ocr_fix, "Also write an LLM OCR-corrected copy");
    c_export->add_option("--cache", exp.cache, "Replay cache file");
    c_export->add_option("--prompts", exp.prompts, "Prompt template directory");
    c_export->add_option("--concurrency", exp.concurrency, "Concurrent model calls")->check(CLI::PositiveNumber);

    std::vector<const char*> argv{"frontpage"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        emit_error(err, to_string(Errc::usage), e.what());
        return kExitUsage;
    }

    try {
        const Workspace ws{workspace};
        WorkspaceLock lock(ws.root);
        if (c_ingest->parsed()) return cmd_ingest(ws, ingest, out);
        if (c_detect->parsed()) return cmd_detect(ws, detect, out);
        if (c_match->parsed()) return cmd_match(ws, match, out);
        if (c_calibrate->parsed()) return cmd_calibrate(ws, calibrate, out);
        if (c_assemble->parsed()) return cmd_assemble(ws, out);
        if (c_stats->parsed()) return cmd_stats(ws, out);
        if (c_eval->parsed()) return cmd_eval(ws, eval, out);
        if (c_generate->parsed()) return cmd_generate(ws, generate, out);
        if (c_agree->parsed()) return cmd_agree(ws, records, out);
        if (c_serve->parsed()) return cmd_serve(ws, serve, out);
        if (c_export->parsed()) return cmd_export(ws, exp, out);
    } catch (const Error& e) {
        if (e.code() == Errc::usage) {
            emit_error(err, to_string(e.code()), e.what());
            return kExitUsage;
        }
        emit_error(err, to_string(e.code()), e.what());
        return kExitDomainError;
    } catch (const fs::filesystem_error& e) {
        emit_error(err, to_string(Errc::io_error), e.what());
        return kExitDomainError;
    }
    emit_error(err, to_string(Errc::usage), "no subcommand");
    return kExitUsage;
}

}  // namespace frontpage::cli
