#include "frontpage/teaser_detect.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"
#include "frontpage/unicode.hpp"

namespace frontpage::detect {

using nlohmann::json;

namespace {

// Normalized, whitespace-collapsed, case-folded form used for all matching.
std::string prepare(std::string_view text) {
    return unicode::fold_case(unicode::collapse_whitespace(unicode::normalize_nfc(text)));
}

struct PhraseMatch {
    std::size_t begin;
    std::size_t end;
};

std::vector<PhraseMatch> find_phrase(std::string_view prepared_text, std::string_view prepared_phrase) {
    std::vector<PhraseMatch> out;
    if (prepared_phrase.empty()) return out;
    std::size_t pos = 0;
    while ((pos = prepared_text.find(prepared_phrase, pos)) != std::string_view::npos) {
        const std::size_t end = pos + prepared_phrase.size();
        if (!unicode::is_letter_or_digit_before(prepared_text, pos) && !unicode::is_letter_at(prepared_text, end))
            out.push_back({pos, end});
        ++pos;
    }
    return out;
}

bool has_any(std::string_view prepared_text, std::span<const std::string> phrases) {
    return std::any_of(phrases.begin(), phrases.end(), [&](const std::string& p) {
        return !find_phrase(prepared_text, prepare(p)).empty();
    });
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool contains_cp(const std::vector<std::string>& set, std::string_view cp) {
    return std::find(set.begin(), set.end(), cp) != set.end();
}

// Extracts numerals from the window text, expanding "a<range-sep>b".
void parse_window(std::string_view window, const PageRefGrammar& g, std::set<int>& out) {
    const auto range_seps = unicode::code_points(g.range_separators);

    struct Num {
        std::size_t begin, end;
        long long value;
    };
    std::vector<Num> nums;
    for (std::size_t i = 0; i < window.size();) {
        if (!is_digit(window[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < window.size() && is_digit(window[j])) ++j;
        // Decimals and clock times ("2.6", "12:30") are not page numbers.
        const bool decimal_before = i >= 2 && (window[i - 1] == '.' || window[i - 1] == ':') && is_digit(window[i - 2]);
        const bool decimal_after = j + 1 < window.size() && (window[j] == '.' || window[j] == ':') && is_digit(window[j + 1]);
        if (!decimal_before && !decimal_after && j - i <= 6) {
            nums.push_back({i, j, std::stoll(std::string(window.substr(i, j - i)))});
        } else {
            nums.push_back({i, j, -1});
        }
        i = j;
    }

    auto valid = [&](long long v) { return v >= 1 && v <= g.max_page; };
    for (std::size_t k = 0; k < nums.size(); ++k) {
        const auto& a = nums[k];
        if (k + 1 < nums.size()) {
            const auto& b = nums[k + 1];
            const std::string gap = unicode::collapse_whitespace(window.substr(a.end, b.begin - a.end));
            const auto gap_cps = unicode::code_points(gap);
            if (gap_cps.size() == 1 && contains_cp(range_seps, gap_cps[0])) {
                if (valid(a.value) && valid(b.value) && a.value <= b.value) {
                    for (long long p = a.value; p <= b.value; ++p) out.insert(static_cast<int>(p));
                }
                ++k;  // both ends consumed
                continue;
            }
        }
        if (valid(a.value)) out.insert(static_cast<int>(a.value));
    }
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t from, std::size_t to) {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (i > from) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

void refs_for_match(std::string_view text, const PhraseMatch& m, const PageRefGrammar& g,
                    PhrasePosition position, std::set<int>& out) {
    const auto window = static_cast<std::size_t>(std::max(g.window_tokens, 0));
    if (g.marker_position == MarkerPosition::before_number) {
        const std::string_view rest = text.substr(m.end);
        const auto tokens = unicode::split_whitespace(rest);
        const bool fragment = !rest.empty() && rest.front() != ' ';
        const std::size_t take = std::min(tokens.size(), window + (fragment ? 1 : 0));
        if (position == PhrasePosition::end && tokens.size() > take) return;
        parse_window(join_tokens(tokens, 0, take), g, out);
    } else {
        const std::string_view before = text.substr(0, m.begin);
        const auto tokens = unicode::split_whitespace(before);
        const bool fragment = !before.empty() && before.back() != ' ';
        const std::size_t take = std::min(tokens.size(), window + (fragment ? 1 : 0));
        if (position == PhrasePosition::end && text.substr(m.end).find_first_not_of(" .") != std::string_view::npos)
            return;
        parse_window(join_tokens(tokens, tokens.size() - take, tokens.size()), g, out);
    }
}

MarkerPosition marker_from_string(const std::string& s) {
    if (s == "before" || s == "before_number") return MarkerPosition::before_number;
    if (s == "after" || s == "after_number") return MarkerPosition::after_number;
    throw Error(Errc::schema_violation, "unknown marker_position '" + s + "'");
}

PhrasePosition phrase_position_from_string(const std::string& s) {
    if (s == "anywhere") return PhrasePosition::anywhere;
    if (s == "end") return PhrasePosition::end;
    throw Error(Errc::schema_violation, "unknown key_phrase_position '" + s + "'");
}

}  // namespace

bool contains_phrase(std::string_view text, std::string_view phrase) {
    return !find_phrase(prepare(text), prepare(phrase)).empty();
}

std::set<int> parse_page_refs(std::string_view text, std::span<const std::string> key_phrases,
                              const PageRefGrammar& grammar, PhrasePosition position) {
    const std::string prepared = prepare(text);
    std::set<int> out;
    for (const auto& phrase : key_phrases)
        for (const auto& m : find_phrase(prepared, prepare(phrase))) refs_for_match(prepared, m, grammar, position, out);
    if (out.empty()) throw Error(Errc::no_reference, "no page reference next to a key phrase");
    return out;
}

void LanguageProfile::validate() const {
    if (key_phrases.empty()) throw Error(Errc::schema_violation, "profile '" + title_id + "': key_phrases is empty");
    for (const auto& k : key_phrases) {
        if (prepare(k).empty()) throw Error(Errc::schema_violation, "profile '" + title_id + "': blank key phrase");
        for (const auto& c : continuation_phrases)
            if (prepare(k) == prepare(c))
                throw Error(Errc::schema_violation,
                            "profile '" + title_id + "': '" + k + "' is both a key and a continuation phrase");
    }
    if (page_ref_grammar.window_tokens < 0 || page_ref_grammar.max_page < 1)
        throw Error(Errc::schema_violation, "profile '" + title_id + "': invalid page_ref_grammar");
}

LanguageProfile profile_from_json(const json& j) {
    LanguageProfile p;
    try {
        p.language = j.at("language").get<std::string>();
        p.title_id = j.at("title_id").get<std::string>();
        p.key_phrases = j.at("key_phrases").get<std::vector<std::string>>();
        p.continuation_phrases = j.value("continuation_phrases", std::vector<std::string>{});
        p.min_words = j.value("min_words", std::size_t{10});
        p.front_page_only = j.value("front_page_only", true);
        p.key_phrase_position = phrase_position_from_string(j.value("key_phrase_position", std::string("anywhere")));
        if (j.contains("page_ref_grammar")) {
            const auto& g = j["page_ref_grammar"];
            p.page_ref_grammar.marker_position = marker_from_string(g.value("marker_position", std::string("before")));
            p.page_ref_grammar.range_separators = g.value("range_separators", p.page_ref_grammar.range_separators);
            p.page_ref_grammar.list_separators = g.value("list_separators", p.page_ref_grammar.list_separators);
            p.page_ref_grammar.window_tokens = g.value("window_tokens", p.page_ref_grammar.window_tokens);
            p.page_ref_grammar.max_page = g.value("max_page", p.page_ref_grammar.max_page);
        }
        p.tokenizer.language = p.language;
        if (j.contains("tokenizer")) {
            p.tokenizer.lowercase = j["tokenizer"].value("lowercase", true);
            p.tokenizer.strip_punctuation = j["tokenizer"].value("strip_punctuation", true);
        }
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("language profile: ") + e.what());
    }
    p.validate();
    return p;
}

json to_json(const LanguageProfile& p) {
    const auto& g = p.page_ref_grammar;
    return {{"language", p.language},
            {"title_id", p.title_id},
            {"key_phrases", p.key_phrases},
            {"continuation_phrases", p.continuation_phrases},
            {"page_ref_grammar",
             {{"marker_position", g.marker_position == MarkerPosition::before_number ? "before" : "after"},
              {"range_separators", g.range_separators},
              {"list_separators", g.list_separators},
              {"window_tokens", g.window_tokens},
              {"max_page", g.max_page}}},
            {"min_words", p.min_words},
            {"front_page_only", p.front_page_only},
            {"key_phrase_position", p.key_phrase_position == PhrasePosition::anywhere ? "anywhere" : "end"},
            {"tokenizer", {{"lowercase", p.tokenizer.lowercase}, {"strip_punctuation", p.tokenizer.strip_punctuation}}}};
}

LanguageProfile load_profile(const std::filesystem::path& path) {
    try {
        return profile_from_json(jsonl::read_document(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

json to_json(const Teaser& t) {
    return {{"id", t.id},
            {"title_id", t.issue_ref.title_id},
            {"date", t.issue_ref.date},
            {"text", t.text},
            {"word_count", t.word_count},
            {"page_refs", t.page_refs},
            {"source_block_ids", t.source_block_ids}};
}

Teaser teaser_from_json(const json& j) {
    Teaser t;
    try {
        t.id = j.at("id").get<std::string>();
        t.issue_ref = {j.at("title_id").get<std::string>(), j.at("date").get<std::string>()};
        t.text = j.at("text").get<std::string>();
        t.word_count = j.at("word_count").get<std::size_t>();
        for (const auto& p : j.at("page_refs")) t.page_refs.insert(p.get<int>());
        t.source_block_ids = j.at("source_block_ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("teaser record: ") + e.what());
    }
    if (t.source_block_ids.empty()) throw Error(Errc::schema_violation, "teaser record: no source blocks");
    return t;
}

std::vector<Teaser> detect_teasers(const corpus::Issue& issue, const LanguageProfile& profile) {
    std::vector<Teaser> out;
    const auto ref = issue.ref();

    for (const auto& page : issue.pages) {
        if (profile.front_page_only && page.number != 1) continue;
        const auto& blocks = page.blocks;

        // Anchor = a block carrying a key phrase, a usable page reference and
        // no continuation phrase.
        std::vector<std::optional<std::set<int>>> anchors(blocks.size());
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const auto& b = blocks[i];
            if (b.kind == corpus::BlockKind::caption) continue;
            const std::string prepared = prepare(b.text);
            if (!has_any(prepared, profile.key_phrases)) continue;
            if (has_any(prepared, profile.continuation_phrases)) continue;
            std::set<int> refs;
            try {
                refs = parse_page_refs(b.text, profile.key_phrases, profile.page_ref_grammar,
                                       profile.key_phrase_position);
            } catch (const Error&) {
                continue;
            }
            refs.erase(1);
            refs.erase(page.number);
            if (!refs.empty()) anchors[i] = std::move(refs);
        }

        for (std::size_t i = 0; i < blocks.size(); ++i) {
            if (!anchors[i]) continue;
            const auto& b = blocks[i];
            // A headline anchor directly followed by another anchor is absorbed
            // by that anchor.
            if (b.kind == corpus::BlockKind::headline && i + 1 < blocks.size() && anchors[i + 1]) continue;

            Teaser t;
            t.issue_ref = ref;
            t.id = corpus::make_id(ref, b.id);
            t.page_refs = *anchors[i];
            t.text = b.text;
            const bool merge = i > 0 && blocks[i - 1].kind == corpus::BlockKind::headline &&
                               !has_any(prepare(blocks[i - 1].text), profile.continuation_phrases);
            if (merge) {
                t.text = blocks[i - 1].text + " " + b.text;
                t.source_block_ids.push_back(blocks[i - 1].id);
                if (anchors[i - 1]) t.page_refs.insert(anchors[i - 1]->begin(), anchors[i - 1]->end());
            }
            t.source_block_ids.push_back(b.id);
            t.word_count = profile.tokenizer.count(t.text);
            if (t.word_count < profile.min_words) continue;
            out.push_back(std::move(t));
        }
    }
    return out;
}

GoldBlockLabel gold_label_from_json(const json& j) {
    GoldBlockLabel g;
    try {
        g.issue_ref = {j.at("title_id").get<std::string>(), j.at("date").get<std::string>()};
        g.block_id = j.at("block_id").get<std::string>();
        const auto& label = j.at("is_teaser");
        g.is_teaser = label.is_boolean() ? label.get<bool>() : label.get<int>() != 0;
        if (j.contains("cause") && !j["cause"].is_null()) g.cause = j["cause"].get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("detection gold record: ") + e.what());
    }
    return g;
}

std::vector<GoldBlockLabel> load_detection_gold(const std::filesystem::path& path) {
    std::vector<GoldBlockLabel> out;
    for (const auto& j : jsonl::read(path)) out.push_back(gold_label_from_json(j));
    return out;
}

double DetectionReport::error_share(const std::string& cause) const {
    const std::size_t errors = false_positives + false_negatives;
    auto it = error_breakdown.find(cause);
    if (errors == 0 || it == error_breakdown.end()) return 0.0;
    return static_cast<double>(it->second.false_negatives + it->second.false_positives) / static_cast<double>(errors);
}

DetectionReport evaluate_detection(std::span<const Teaser> predicted, std::span<const GoldBlockLabel> gold) {
    std::map<std::pair<std::string, std::string>, const GoldBlockLabel*> by_block;
    std::set<std::string> gold_issues;
    for (const auto& g : gold) {
        by_block[{g.issue_ref.key(), g.block_id}] = &g;
        gold_issues.insert(g.issue_ref.key());
    }
    std::set<std::pair<std::string, std::string>> predicted_blocks;
    for (const auto& t : predicted) {
        if (!gold_issues.contains(t.issue_ref.key()))
            throw Error(Errc::mismatched_issues, "prediction for issue " + t.issue_ref.key() + " has no gold labels");
        predicted_blocks.insert({t.issue_ref.key(), t.anchor_block_id()});
    }

    DetectionReport r;
    auto tag = [](const GoldBlockLabel* g) { return g && !g->cause.empty() ? g->cause : std::string("untagged"); };
    for (const auto& key : predicted_blocks) {
        auto it = by_block.find(key);
        const GoldBlockLabel* g = it == by_block.end() ? nullptr : it->second;
        if (g && g->is_teaser) {
            ++r.true_positives;
        } else {
            ++r.false_positives;
            ++r.error_breakdown[g ? tag(g) : std::string("unlabeled")].false_positives;
        }
    }
    for (const auto& g : gold) {
        if (!g.is_teaser) continue;
        if (!predicted_blocks.contains({g.issue_ref.key(), g.block_id})) {
            ++r.false_negatives;
            ++r.error_breakdown[tag(&g)].false_negatives;
        }
    }
    const auto tp = static_cast<double>(r.true_positives);
    r.precision = predicted_blocks.empty() ? 0.0 : tp / static_cast<double>(r.true_positives + r.false_positives);
    r.recall = r.true_positives + r.false_negatives == 0
                   ? 0.0
                   : tp / static_cast<double>(r.true_positives + r.false_negatives);
    r.f1 = text::harmonic_mean(r.precision, r.recall);
    return r;
}

json to_json(const DetectionReport& r) {
    json breakdown = json::object();
    for (const auto& [cause, c] : r.error_breakdown)
        breakdown[cause] = {{"false_negatives", c.false_negatives},
                            {"false_positives", c.false_positives},
                            {"share", r.error_share(cause)}};
    return {{"true_positives", r.true_positives},
            {"false_positives", r.false_positives},
            {"false_negatives", r.false_negatives},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"error_breakdown", breakdown}};
}

std::string format_table(const DetectionReport& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "Teaser detection\n"
       << "  TP " << r.true_positives << "  FP " << r.false_positives << "  FN " << r.false_negatives << "\n"
       << "  precision " << r.precision << "  recall " << r.recall << "  f1 " << r.f1 << "\n";
    if (!r.error_breakdown.empty()) {
        os << "  Error type            Share   Category\n";
        for (const auto& [cause, c] : r.error_breakdown) {
            std::string name = cause;
            name.resize(std::max<std::size_t>(name.size(), 20), ' ');
            os << "  " << name << "  " << r.error_share(cause) << "   "
               << (c.false_negatives >= c.false_positives ? "False negative" : "False positive") << "\n";
        }
    }
    return os.str();
}

}  // namespace frontpage::detect
