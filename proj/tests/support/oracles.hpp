#pragma once

// Independent reference computations for the test suites. Everything here is
// deliberately naive (exponential enumeration, direct pair loops) so that it
// shares no code path with the library under test.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline std::filesystem::path source_dir() { return FRONTPAGE_SOURCE_DIR; }
inline std::filesystem::path fixture_dir() { return source_dir() / "tests" / "fixtures"; }
inline std::filesystem::path data_dir() { return source_dir() / "tests" / "data"; }

template <class T>
bool is_subsequence(const std::vector<T>& sub, const std::vector<T>& seq) {
    std::size_t j = 0;
    for (std::size_t i = 0; i < seq.size() && j < sub.size(); ++i)
        if (seq[i] == sub[j]) ++j;
    return j == sub.size();
}

// Longest common subsequence by trying every subsequence of `a`.
template <class T>
std::size_t brute_lcs(const std::vector<T>& a, const std::vector<T>& b) {
    std::size_t best = 0;
    const std::uint32_t limit = 1u << a.size();
    std::vector<T> sub;
    for (std::uint32_t mask = 0; mask < limit; ++mask) {
        const auto len = static_cast<std::size_t>(__builtin_popcount(mask));
        if (len <= best || len > b.size()) continue;
        sub.clear();
        for (std::size_t i = 0; i < a.size(); ++i)
            if (mask & (1u << i)) sub.push_back(a[i]);
        if (is_subsequence(sub, b)) best = len;
    }
    return best;
}

// Every sequence over the symbols 0..k-1 with length in [0, max_len], shortest first.
inline std::vector<std::vector<int>> all_sequences(int k, std::size_t max_len) {
    std::vector<std::vector<int>> out{{}};
    std::vector<std::vector<int>> frontier{{}};
    for (std::size_t len = 1; len <= max_len; ++len) {
        std::vector<std::vector<int>> next;
        for (const auto& s : frontier)
            for (int sym = 0; sym < k; ++sym) {
                auto t = s;
                t.push_back(sym);
                next.push_back(std::move(t));
            }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

// Krippendorff's alpha (interval) by enumerating value pairs: within-unit
// ordered pairs weighted 1/(m_u - 1) give D_o, and every ordered pair of
// pairable values across the whole data set gives D_e. No coincidence matrix
// is materialized.
inline std::pair<bool, double> brute_alpha_interval(const std::vector<std::vector<double>>& units) {
    std::vector<double> pool;
    double within = 0;
    for (const auto& u : units) {
        const std::size_t m = u.size();
        if (m < 2) continue;
        pool.insert(pool.end(), u.begin(), u.end());
        double s = 0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i != j) s += (u[i] - u[j]) * (u[i] - u[j]);
        within += s / static_cast<double>(m - 1);
    }
    const auto n = static_cast<double>(pool.size());
    if (pool.size() < 2) return {false, 0.0};
    double across = 0;
    for (std::size_t i = 0; i < pool.size(); ++i)
        for (std::size_t j = 0; j < pool.size(); ++j)
            if (i != j) across += (pool[i] - pool[j]) * (pool[i] - pool[j]);
    if (across == 0) return {false, 0.0};
    const double d_o = within / n;
    const double d_e = across / (n * (n - 1));
    return {true, 1.0 - d_o / d_e};
}

struct Sweep {
    double threshold = 0.0;
    double f1 = 0.0;
};

// F1 of "match iff score >= t" as the exact fraction 2tp / (2tp + fp + fn).
inline std::pair<std::size_t, std::size_t> f1_fraction(const std::vector<std::pair<double, bool>>& scored,
                                                       double t) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& [s, label] : scored) {
        const bool predicted = s >= t;
        if (predicted && label) ++tp;
        else if (predicted) ++fp;
        else if (label) ++fn;
    }
    return {2 * tp, 2 * tp + fp + fn};
}

inline double f1_at(const std::vector<std::pair<double, bool>>& scored, double t) {
    const auto [num, den] = f1_fraction(scored, t);
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Tries every observed score as a cut and keeps the best F1 (compared as exact
// fractions), smallest t on ties.
inline Sweep sweep_thresholds(const std::vector<std::pair<double, bool>>& scored) {
    std::vector<double> cuts;
    for (const auto& [s, label] : scored) cuts.push_back(s);
    std::sort(cuts.begin(), cuts.end());
    Sweep best;
    std::size_t best_num = 0, best_den = 1;
    bool first = true;
    for (double t : cuts) {
        const auto [num, den] = f1_fraction(scored, t);
        if (den == 0) continue;
        if (first || num * best_den > best_num * den) {
            best_num = num;
            best_den = den;
            best = {t, static_cast<double>(num) / static_cast<double>(den)};
            first = false;
        }
    }
    return best;
}

// ROUGE-N cases counted by hand: clipped overlap and n-gram totals on each side.
struct RougeCase {
    const char* reference;
    const char* candidate;
    int n;
    std::size_t overlap;
    std::size_t ref_ngrams;
    std::size_t cand_ngrams;
};

inline const std::vector<RougeCase>& curated_rouge_cases() {
    static const std::vector<RougeCase> cases{
        {"the cat sat", "the cat", 1, 2, 3, 2},
        {"the cat sat on the mat", "the cat", 1, 2, 6, 2},
        {"the the the", "the", 1, 1, 3, 1},
        {"the", "the the the", 1, 1, 1, 3},
        {"a b c", "d e f", 1, 0, 3, 3},
        {"a b c", "c b a", 1, 3, 3, 3},
        {"a a b b", "a b b b", 1, 3, 4, 4},
        {"The Cat, sat.", "the cat sat", 1, 3, 3, 3},
        {"one two three four five", "two four six", 1, 2, 5, 3},
        {"x y x y x", "x x x x y y", 1, 5, 5, 6},
        {"police arrested two men on tuesday", "two men were arrested", 1, 3, 6, 4},
        {"the cat sat", "the cat", 2, 1, 2, 1},
        {"a b c d", "a c d", 2, 1, 3, 2},
        {"a b a b", "a b", 2, 1, 3, 1},
        {"a b a b", "a b a b a b", 2, 3, 3, 5},
        {"a b c", "c b a", 2, 0, 2, 2},
        {"the quick brown fox", "the quick brown fox", 2, 3, 3, 3},
        {"x x x", "x x", 2, 1, 2, 1},
        {"new bridge opens today", "the new bridge opens", 2, 2, 3, 3},
        {"Rain, rain; go away!", "rain rain go away", 2, 3, 3, 3},
        {"a b", "a", 2, 0, 1, 0},
        {"storm closes harbour road", "harbour road closed by storm", 2, 1, 3, 4},
    };
    return cases;
}

}  // namespace oracle
