#include "frontpage/agreement.hpp"

#include <algorithm>
#include <set>

#include "frontpage/error.hpp"
#include "frontpage/jsonl.hpp"

namespace frontpage::agreement {

using nlohmann::json;

std::string_view to_string(AnnotationTask t) noexcept {
    return t == AnnotationTask::match_binary ? "match_binary" : "quality_1_5";
}

std::string_view to_string(QualityDimension d) noexcept {
    switch (d) {
        case QualityDimension::coherence: return "coherence";
        case QualityDimension::consistency: return "consistency";
        case QualityDimension::fluency: return "fluency";
        case QualityDimension::relevance: return "relevance";
    }
    return "coherence";
}

AnnotationTask annotation_task_from_string(std::string_view s) {
    if (s == "match_binary") return AnnotationTask::match_binary;
    if (s == "quality_1_5") return AnnotationTask::quality_1_5;
    throw Error(Errc::schema_violation, "unknown annotation task '" + std::string(s) + "'");
}

QualityDimension quality_dimension_from_string(std::string_view s) {
    for (auto d : kQualityDimensions)
        if (to_string(d) == s) return d;
    throw Error(Errc::schema_violation, "unknown quality dimension '" + std::string(s) + "'");
}

void validate(const AnnotationRecord& r) {
    if (r.annotator_id.empty() || r.item_id.empty())
        throw Error(Errc::schema_violation, "annotation record needs annotator_id and item_id");
    if (r.task == AnnotationTask::match_binary) {
        if (r.value != 0 && r.value != 1)
            throw Error(Errc::schema_violation, "binary annotation value must be 0 or 1");
    } else {
        if (r.value < 1 || r.value > 5) throw Error(Errc::schema_violation, "quality score must be in 1..5");
        if (!r.dimension) throw Error(Errc::schema_violation, "quality annotation needs a dimension");
    }
}

json to_json(const AnnotationRecord& r) {
    return {{"annotator_id", r.annotator_id},
            {"item_id", r.item_id},
            {"task", to_string(r.task)},
            {"value", r.value},
            {"dimension", r.dimension ? json(to_string(*r.dimension)) : json(nullptr)}};
}

AnnotationRecord record_from_json(const json& j) {
    AnnotationRecord r;
    try {
        r.annotator_id = j.at("annotator_id").get<std::string>();
        r.item_id = j.at("item_id").get<std::string>();
        r.task = annotation_task_from_string(j.at("task").get<std::string>());
        r.value = j.at("value").get<int>();
        if (j.contains("dimension") && !j["dimension"].is_null())
            r.dimension = quality_dimension_from_string(j["dimension"].get<std::string>());
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("annotation record: ") + e.what());
    }
    validate(r);
    return r;
}

std::vector<AnnotationRecord> load_records(const std::filesystem::path& path) {
    std::vector<AnnotationRecord> out;
    for (const auto& j : jsonl::read(path)) out.push_back(record_from_json(j));
    return out;
}

double cohens_kappa(const BinaryConfusion& m) {
    const std::int64_t n = m.total();
    if (n <= 0) throw Error(Errc::insufficient_overlap, "no co-annotated items");
    // With counts: p_o = agree/n, p_e = (rowA1*colB1 + rowA0*colB0)/n^2.
    const std::int64_t agree = m.a + m.d;
    const std::int64_t expected = (m.a + m.b) * (m.a + m.c) + (m.c + m.d) * (m.b + m.d);
    const std::int64_t num = n * agree - expected;
    const std::int64_t den = n * n - expected;
    if (den == 0) return 1.0;  // p_e = 1 forces p_o = 1
    return static_cast<double>(num) / static_cast<double>(den);
}

BinaryConfusion binary_confusion(std::span<const AnnotationRecord> records) {
    std::set<std::string> annotators;
    for (const auto& r : records)
        if (r.task == AnnotationTask::match_binary) annotators.insert(r.annotator_id);
    if (annotators.size() != 2)
        throw Error(Errc::invalid_argument,
                    "Cohen's kappa needs exactly two annotators, got " + std::to_string(annotators.size()));
    const std::string& first = *annotators.begin();
    std::map<std::string, std::pair<std::optional<int>, std::optional<int>>> items;
    for (const auto& r : records) {
        if (r.task != AnnotationTask::match_binary) continue;
        auto& slot = items[r.item_id];
        auto& v = r.annotator_id == first ? slot.first : slot.second;
        if (!v) v = r.value;
    }
    BinaryConfusion m;
    for (const auto& [_, v] : items) {
        if (!v.first || !v.second) continue;
        if (*v.first && *v.second) ++m.a;
        else if (*v.first) ++m.b;
        else if (*v.second) ++m.c;
        else ++m.d;
    }
    if (m.total() == 0) throw Error(Errc::insufficient_overlap, "the two annotators share no items");
    return m;
}

double cohens_kappa(std::span<const AnnotationRecord> records) { return cohens_kappa(binary_confusion(records)); }

double krippendorff_alpha_interval(const Units& units) {
    // Coincidence matrix over the distinct values.
    std::vector<double> values;
    for (const auto& u : units)
        if (u.size() >= 2) values.insert(values.end(), u.begin(), u.end());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    if (values.empty()) throw Error(Errc::no_variation, "no unit has two or more values");

    const std::size_t k = values.size();
    auto index = [&](double v) {
        return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
    };
    std::vector<double> o(k * k, 0.0);
    for (const auto& u : units) {
        const std::size_t m = u.size();
        if (m < 2) continue;
        const double w = 1.0 / static_cast<double>(m - 1);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i != j) o[index(u[i]) * k + index(u[j])] += w;
    }
    std::vector<double> marginal(k, 0.0);
    double n = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t d = 0; d < k; ++d) marginal[c] += o[c * k + d];
        n += marginal[c];
    }
    double observed = 0.0, expected = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t d = 0; d < k; ++d) {
            const double delta = (values[c] - values[d]) * (values[c] - values[d]);
            observed += o[c * k + d] * delta;
            expected += marginal[c] * marginal[d] * delta;
        }
    }
    if (expected == 0.0) throw Error(Errc::no_variation, "all pairable values are identical; alpha is undefined");
    if (observed == 0.0) return 1.0;
    return 1.0 - (n - 1.0) * observed / expected;
}

AlphaReport krippendorff_alpha(std::span<const AnnotationRecord> records) {
    std::map<std::pair<std::string, QualityDimension>, std::vector<double>> by_unit;
    std::set<std::tuple<std::string, std::string, QualityDimension>> seen;
    for (const auto& r : records) {
        if (r.task != AnnotationTask::quality_1_5 || !r.dimension) continue;
        // one value per (annotator, item, dimension)
        if (!seen.insert({r.annotator_id, r.item_id, *r.dimension}).second) continue;
        by_unit[{r.item_id, *r.dimension}].push_back(r.value);
    }
    AlphaReport rep;
    auto attempt = [&](const Units& units, const std::string& label) -> std::optional<double> {
        try {
            return krippendorff_alpha_interval(units);
        } catch (const Error& e) {
            rep.notes.push_back(label + ": " + e.what());
            return std::nullopt;
        }
    };
    Units pooled;
    std::map<QualityDimension, Units> split;
    for (const auto& [key, vals] : by_unit) {
        pooled.push_back(vals);
        split[key.second].push_back(vals);
    }
    rep.pooled = attempt(pooled, "pooled");
    double sum = 0.0;
    int defined = 0;
    for (auto d : kQualityDimensions) {
        auto it = split.find(d);
        if (it == split.end()) continue;
        auto a = attempt(it->second, std::string(to_string(d)));
        rep.per_dimension[d] = a;
        if (a) {
            sum += *a;
            ++defined;
        }
    }
    if (defined > 0) rep.mean_of_dimensions = sum / defined;
    return rep;
}

json to_json(const AlphaReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json per = json::object();
    for (const auto& [d, v] : r.per_dimension) per[std::string(to_string(d))] = opt(v);
    return {{"pooled", opt(r.pooled)},
            {"per_dimension", per},
            {"mean_of_dimensions", opt(r.mean_of_dimensions)},
            {"notes", r.notes}};
}

}  // namespace frontpage::agreement
