#include "frontpage/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"
#include "frontpage/unicode.hpp"

namespace frontpage::match {

using nlohmann::json;

std::string_view to_string(Decision d) noexcept {
    switch (d) {
        case Decision::match: return "match";
        case Decision::no_match: return "no_match";
        case Decision::undecided: return "undecided";
    }
    return "undecided";
}

std::string_view to_string(Backend b) noexcept {
    switch (b) {
        case Backend::tfidf: return "tfidf";
        case Backend::embedding: return "embedding";
        case Backend::zero_shot: return "zero_shot";
    }
    return "tfidf";
}

Decision decision_from_string(std::string_view s) {
    if (s == "match") return Decision::match;
    if (s == "no_match") return Decision::no_match;
    if (s == "undecided") return Decision::undecided;
    throw Error(Errc::schema_violation, "unknown decision '" + std::string(s) + "'");
}

Backend backend_from_string(std::string_view s) {
    if (s == "tfidf") return Backend::tfidf;
    if (s == "embedding") return Backend::embedding;
    if (s == "zero_shot" || s == "zero-shot") return Backend::zero_shot;
    throw Error(Errc::invalid_argument, "unknown backend '" + std::string(s) + "'");
}

json to_json(const CandidatePair& p) {
    return {{"teaser_id", p.teaser_id},
            {"article_id", p.article_id},
            {"backend", to_string(p.backend)},
            {"score", p.score ? json(*p.score) : json(nullptr)},
            {"decision", to_string(p.decision)}};
}

CandidatePair pair_from_json(const json& j) {
    CandidatePair p;
    try {
        p.teaser_id = j.at("teaser_id").get<std::string>();
        p.article_id = j.at("article_id").get<std::string>();
        p.backend = backend_from_string(j.value("backend", std::string("tfidf")));
        if (j.contains("score") && !j["score"].is_null()) p.score = j["score"].get<double>();
        p.decision = decision_from_string(j.value("decision", std::string("undecided")));
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("pair record: ") + e.what());
    }
    return p;
}

std::vector<CandidatePair> build_candidates(std::span<const detect::Teaser> teasers,
                                            std::span<const corpus::Article> articles) {
    // (issue, page) -> article indices in input order
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> by_page;
    for (std::size_t i = 0; i < articles.size(); ++i)
        for (int p : articles[i].page_numbers) by_page[{articles[i].issue_ref.key(), p}].push_back(i);

    std::vector<CandidatePair> out;
    for (const auto& t : teasers) {
        std::set<std::size_t> hits;
        for (int p : t.page_refs) {
            auto it = by_page.find({t.issue_ref.key(), p});
            if (it != by_page.end()) hits.insert(it->second.begin(), it->second.end());
        }
        for (std::size_t i : hits) out.push_back({t.id, articles[i].id, std::nullopt, Decision::undecided, Backend::tfidf});
    }
    return out;
}

// ---------------------------------------------------------------------------
// TF-IDF

TfIdfModel TfIdfModel::fit(std::span<const Document> corpus) {
    if (corpus.empty()) throw Error(Errc::empty_corpus, "cannot fit TF-IDF on an empty corpus");
    std::map<std::string, std::size_t> df;  // ordered so term indices are deterministic
    for (const auto& doc : corpus) {
        std::set<std::string_view> seen(doc.begin(), doc.end());
        for (auto term : seen) ++df[std::string(term)];
    }
    TfIdfModel m;
    m.doc_count_ = corpus.size();
    m.idf_.reserve(df.size());
    for (const auto& [term, count] : df) {
        m.vocabulary_.emplace(term, m.idf_.size());
        m.idf_.push_back(std::log(static_cast<double>(m.doc_count_) / static_cast<double>(count)) + 1.0);
    }
    return m;
}

std::optional<std::size_t> TfIdfModel::index_of(std::string_view term) const {
    auto it = vocabulary_.find(std::string(term));
    if (it == vocabulary_.end()) return std::nullopt;
    return it->second;
}

double TfIdfModel::idf(std::string_view term) const {
    auto idx = index_of(term);
    if (!idx) throw std::out_of_range("term not in vocabulary");
    return idf_[*idx];
}

SparseVector TfIdfModel::vectorize(std::span<const std::string> doc) const {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& term : doc) {
        auto it = vocabulary_.find(term);
        if (it != vocabulary_.end()) ++counts[it->second];
    }
    SparseVector v;
    v.reserve(counts.size());
    const auto len = static_cast<double>(doc.size());
    for (const auto& [idx, c] : counts) v.emplace_back(idx, static_cast<double>(c) / len * idf_[idx]);
    return v;
}

double cosine(const SparseVector& a, const SparseVector& b) {
    if (a.empty() || b.empty()) return 0.0;
    if (a == b) return 1.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [_, w] : a) na += w * w;
    for (const auto& [_, w] : b) nb += w * w;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first == b[j].first) {
            dot += a[i].second * b[j].second;
            ++i;
            ++j;
        } else if (a[i].first < b[j].first) {
            ++i;
        } else {
            ++j;
        }
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(Errc::invalid_argument, "vector dimensions differ");
    if (std::equal(a.begin(), a.end(), b.begin(), b.end()) && !a.empty()) {
        const bool nonzero = std::any_of(a.begin(), a.end(), [](double x) { return x != 0.0; });
        return nonzero ? 1.0 : 0.0;
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double cosine_score(const TfIdfModel& model, std::span<const std::string> a, std::span<const std::string> b) {
    return cosine(model.vectorize(a), model.vectorize(b));
}

TextIndex TextIndex::build(std::span<const detect::Teaser> teasers, std::span<const corpus::Article> articles) {
    TextIndex idx;
    for (const auto& t : teasers) idx.teasers.emplace(t.id, t.text);
    for (const auto& a : articles) idx.articles.emplace(a.id, a.full_text());
    return idx;
}

const std::string& TextIndex::teaser(const std::string& id) const {
    auto it = teasers.find(id);
    if (it == teasers.end()) throw Error(Errc::dangling_reference, "unknown teaser '" + id + "'");
    return it->second;
}

const std::string& TextIndex::article(const std::string& id) const {
    auto it = articles.find(id);
    if (it == articles.end()) throw Error(Errc::dangling_reference, "unknown article '" + id + "'");
    return it->second;
}

TfIdfModel fit_corpus_model(std::span<const detect::Teaser> teasers, std::span<const corpus::Article> articles,
                            const text::Tokenizer& tok) {
    std::vector<Document> docs;
    docs.reserve(teasers.size() + articles.size());
    for (const auto& a : articles) docs.push_back(tok(a.full_text()));
    for (const auto& t : teasers) docs.push_back(tok(t.text));
    return TfIdfModel::fit(docs);
}

std::vector<CandidatePair> decide_tfidf(std::span<const CandidatePair> pairs, const TfIdfModel& model,
                                        const TextIndex& texts, double threshold, const text::Tokenizer& tok) {
    if (threshold < 0.0 || threshold > 1.0) throw Error(Errc::invalid_argument, "threshold must be in [0,1]");
    std::unordered_map<std::string, SparseVector> teaser_vecs, article_vecs;
    auto vec = [&](std::unordered_map<std::string, SparseVector>& cache, const std::string& id,
                   const std::string& text) -> const SparseVector& {
        auto it = cache.find(id);
        if (it == cache.end()) it = cache.emplace(id, model.vectorize(tok(text))).first;
        return it->second;
    };
    std::vector<CandidatePair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        CandidatePair d = p;
        d.backend = Backend::tfidf;
        d.score = cosine(vec(teaser_vecs, p.teaser_id, texts.teaser(p.teaser_id)),
                         vec(article_vecs, p.article_id, texts.article(p.article_id)));
        d.decision = *d.score >= threshold ? Decision::match : Decision::no_match;
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<CandidatePair> apply_threshold(std::span<const CandidatePair> pairs, double threshold) {
    std::vector<CandidatePair> out(pairs.begin(), pairs.end());
    for (auto& p : out)
        if (p.score) p.decision = *p.score >= threshold ? Decision::match : Decision::no_match;
    return out;
}

// ---------------------------------------------------------------------------
// Calibration

namespace {
double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

double ConfusionCounts::precision() const { return ratio(tp, tp + fp); }
double ConfusionCounts::recall() const { return ratio(tp, tp + fn); }
double ConfusionCounts::f1() const { return ratio(2 * tp, 2 * tp + fp + fn); }
double ConfusionCounts::accuracy() const { return ratio(tp + tn, total()); }

CalibrationResult calibrate_threshold(std::span<const ScoredLabel> scored) {
    const auto positives = static_cast<std::size_t>(std::count_if(scored.begin(), scored.end(),
                                                                  [](const ScoredLabel& s) { return s.label; }));
    if (positives == 0 || positives == scored.size())
        throw Error(Errc::degenerate_labels, "calibration needs at least one positive and one negative label");

    std::vector<ScoredLabel> sorted(scored.begin(), scored.end());
    std::sort(sorted.begin(), sorted.end(), [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

    // Walk thresholds from the highest score down; at each distinct score t,
    // everything with score >= t is predicted positive.
    ConfusionCounts best;
    double best_t = 0.0;
    bool have_best = false;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double t = sorted[i].score;
        while (i < sorted.size() && sorted[i].score == t) {
            (sorted[i].label ? tp : fp) += 1;
            ++i;
        }
        ConfusionCounts c;
        c.tp = tp;
        c.fp = fp;
        c.fn = positives - tp;
        c.tn = (sorted.size() - positives) - fp;
        // F1 = 2tp / (2tp + fp + fn); compare fractions exactly. Ties go to the
        // smaller threshold, i.e. the later one in this descending walk.
        const auto num = static_cast<unsigned long long>(2 * c.tp);
        const auto den = static_cast<unsigned long long>(2 * c.tp + c.fp + c.fn);
        const auto best_num = static_cast<unsigned long long>(2 * best.tp);
        const auto best_den = static_cast<unsigned long long>(2 * best.tp + best.fp + best.fn);
        if (!have_best || num * best_den >= best_num * den) {
            best = c;
            best_t = t;
            have_best = true;
        }
    }
    CalibrationResult r;
    r.threshold = best_t;
    r.counts = best;
    r.precision = best.precision();
    r.recall = best.recall();
    r.f1 = best.f1();
    r.accuracy = best.accuracy();
    r.support = scored.size();
    return r;
}

json to_json(const CalibrationResult& r) {
    return {{"threshold", r.threshold},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"accuracy", r.accuracy},
            {"support", r.support},
            {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}}};
}

// ---------------------------------------------------------------------------
// Embedding backend

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& path) {
    for (const auto& j : jsonl::read(path)) {
        std::string key;
        if (j.contains("text_sha256"))
            key = j["text_sha256"].get<std::string>();
        else if (j.contains("text"))
            key = llm::sha256_hex(unicode::normalize_nfc(j["text"].get<std::string>()));
        else
            throw Error(Errc::schema_violation, path.string() + ": vector record needs 'text' or 'text_sha256'");
        vectors_[key] = j.at("vector").get<std::vector<double>>();
    }
}

std::vector<std::optional<std::vector<double>>> FileEmbeddingProvider::embed(std::span<const std::string> texts) {
    std::vector<std::optional<std::vector<double>>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = vectors_.find(llm::sha256_hex(unicode::normalize_nfc(t)));
        out.push_back(it == vectors_.end() ? std::nullopt : std::optional(it->second));
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::string api_key, std::string model)
    : client_(std::move(url), std::move(api_key), std::move(model)) {}

std::vector<std::optional<std::vector<double>>> HttpEmbeddingProvider::embed(std::span<const std::string> texts) {
    return client_.embed(texts);
}

DecideOutcome decide_embedding(std::span<const CandidatePair> pairs, EmbeddingProvider& provider,
                               const TextIndex& texts, double threshold) {
    if (threshold < 0.0 || threshold > 1.0) throw Error(Errc::invalid_argument, "threshold must be in [0,1]");
    DecideOutcome out;
    out.pairs.assign(pairs.begin(), pairs.end());
    for (auto& p : out.pairs) {
        p.backend = Backend::embedding;
        p.decision = Decision::undecided;
        p.score.reset();
    }
    if (pairs.empty()) return out;

    // Unique texts in first-seen order, one batch call.
    std::vector<std::string> batch;
    std::unordered_map<std::string, std::size_t> slot;
    auto add = [&](const std::string& text) {
        if (slot.emplace(text, batch.size()).second) batch.push_back(text);
    };
    for (const auto& p : pairs) {
        add(texts.teaser(p.teaser_id));
        add(texts.article(p.article_id));
    }

    std::vector<std::optional<std::vector<double>>> vectors;
    try {
        vectors = provider.embed(batch);
    } catch (const Error& e) {
        out.failures = pairs.size();
        out.errors.push_back(e.what());
        out.fatal = Errc::provider_unavailable;
        return out;
    }
    vectors.resize(batch.size());

    for (auto& p : out.pairs) {
        const auto& a = vectors[slot.at(texts.teaser(p.teaser_id))];
        const auto& b = vectors[slot.at(texts.article(p.article_id))];
        if (!a || !b || a->size() != b->size() || a->empty()) {
            ++out.failures;
            out.errors.push_back(p.teaser_id + " / " + p.article_id + ": no embedding");
            continue;
        }
        p.score = cosine(*a, *b);
        p.decision = *p.score >= threshold ? Decision::match : Decision::no_match;
    }
    if (out.failures == out.pairs.size()) out.fatal = Errc::provider_unavailable;
    return out;
}

// ---------------------------------------------------------------------------
// Zero-shot backend

std::string match_prompt(const llm::PromptLibrary& prompts, std::string_view article, std::string_view teaser) {
    return prompts.render(llm::Task::match, {{"article", std::string(article)}, {"teaser", std::string(teaser)}});
}

DecideOutcome decide_zero_shot(std::span<const CandidatePair> pairs, llm::LlmClient& client,
                               const llm::PromptLibrary& prompts, const TextIndex& texts) {
    DecideOutcome out;
    out.pairs.assign(pairs.begin(), pairs.end());
    std::vector<std::string> batch;
    batch.reserve(pairs.size());
    for (const auto& p : pairs) batch.push_back(match_prompt(prompts, texts.article(p.article_id), texts.teaser(p.teaser_id)));

    const auto results = client.complete_batch(batch);
    std::optional<Errc> first_error;
    for (std::size_t i = 0; i < out.pairs.size(); ++i) {
        auto& p = out.pairs[i];
        p.backend = Backend::zero_shot;
        p.score.reset();
        p.decision = Decision::undecided;
        const auto& r = results[i];
        if (!r.text) {
            ++out.failures;
            out.errors.push_back(p.teaser_id + " / " + p.article_id + ": " + r.error.value_or("error"));
            if (!first_error && r.error_code) first_error = static_cast<Errc>(*r.error_code);
            continue;
        }
        switch (llm::parse_yes_no(*r.text)) {
            case llm::YesNo::yes: p.decision = Decision::match; break;
            case llm::YesNo::no: p.decision = Decision::no_match; break;
            case llm::YesNo::other: break;
        }
    }
    if (!out.pairs.empty() && out.failures == out.pairs.size())
        out.fatal = first_error.value_or(Errc::endpoint_unavailable);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

std::string pair_item_id(std::string_view teaser_id, std::string_view article_id) {
    return std::string(teaser_id) + "::" + std::string(article_id);
}

std::vector<GoldPair> gold_from_json(std::span<const json> records) {
    std::vector<GoldPair> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& j : records) {
        GoldPair g;
        try {
            if (j.contains("teaser_id")) {
                g.teaser_id = j.at("teaser_id").get<std::string>();
                g.article_id = j.at("article_id").get<std::string>();
                const auto& label = j.at("label");
                g.label = label.is_boolean() ? label.get<bool>()
                          : label.is_string() ? label.get<std::string>() == "match"
                                              : label.get<int>() != 0;
            } else {
                if (j.value("task", std::string()) != "match_binary") continue;
                const auto item = j.at("item_id").get<std::string>();
                const auto sep = item.find("::");
                if (sep == std::string::npos)
                    throw Error(Errc::schema_violation, "match item_id '" + item + "' is not '<teaser>::<article>'");
                g.teaser_id = item.substr(0, sep);
                g.article_id = item.substr(sep + 2);
                g.label = j.at("value").get<int>() != 0;
            }
        } catch (const json::exception& e) {
            throw Error(Errc::schema_violation, std::string("gold record: ") + e.what());
        }
        if (seen.insert({g.teaser_id, g.article_id}).second) out.push_back(std::move(g));
    }
    return out;
}

std::vector<GoldPair> load_gold(const std::filesystem::path& path) {
    const auto records = jsonl::read(path);
    return gold_from_json(records);
}

MatchingReport evaluate_matching(std::span<const CandidatePair> decided, std::span<const GoldPair> gold) {
    std::map<std::pair<std::string, std::string>, bool> labels;
    for (const auto& g : gold) labels.emplace(std::pair{g.teaser_id, g.article_id}, g.label);
    MatchingReport r;
    for (const auto& p : decided) {
        auto it = labels.find({p.teaser_id, p.article_id});
        if (it == labels.end())
            throw Error(Errc::coverage_gap, "gold has no label for pair " + p.teaser_id + " / " + p.article_id);
        if (p.decision == Decision::undecided) ++r.undecided;
        const bool predicted = p.decision == Decision::match;
        if (predicted && it->second) ++r.counts.tp;
        else if (predicted) ++r.counts.fp;
        else if (it->second) ++r.counts.fn;
        else ++r.counts.tn;
    }
    r.accuracy = r.counts.accuracy();
    r.precision = r.counts.precision();
    r.recall = r.counts.recall();
    r.f1 = r.counts.f1();
    return r;
}

std::vector<ScoredLabel> join_scores(std::span<const CandidatePair> pairs, std::span<const GoldPair> gold) {
    std::map<std::pair<std::string, std::string>, double> scores;
    for (const auto& p : pairs)
        if (p.score) scores.emplace(std::pair{p.teaser_id, p.article_id}, *p.score);
    std::vector<ScoredLabel> out;
    for (const auto& g : gold) {
        auto it = scores.find({g.teaser_id, g.article_id});
        if (it != scores.end()) out.push_back({it->second, g.label});
    }
    return out;
}

json to_json(const MatchingReport& r) {
    return {{"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"undecided", r.undecided},
            {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}}};
}

std::string format_table(const std::vector<std::pair<std::string, MatchingReport>>& rows) {
    std::ostringstream os;
    os << "Method                 Acc.   Prec.  Rec.   F1\n";
    for (const auto& [name, r] : rows) {
        std::string n = name;
        n.resize(std::max<std::size_t>(n.size(), 22), ' ');
        char buf[96];
        std::snprintf(buf, sizeof buf, " %5.1f  %5.1f  %5.1f  %5.1f\n", 100 * r.accuracy, 100 * r.precision,
                      100 * r.recall, 100 * r.f1);
        os << n << buf;
    }
    return os.str();
}

}  // namespace frontpage::match
