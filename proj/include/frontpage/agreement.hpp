#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace frontpage::agreement {

enum class AnnotationTask { match_binary, quality_1_5 };
enum class QualityDimension { coherence, consistency, fluency, relevance };

inline constexpr QualityDimension kQualityDimensions[] = {
    QualityDimension::coherence, QualityDimension::consistency, QualityDimension::fluency,
    QualityDimension::relevance};

std::string_view to_string(AnnotationTask t) noexcept;
std::string_view to_string(QualityDimension d) noexcept;
AnnotationTask annotation_task_from_string(std::string_view s);
QualityDimension quality_dimension_from_string(std::string_view s);

struct AnnotationRecord {
    std::string annotator_id;
    std::string item_id;
    AnnotationTask task = AnnotationTask::match_binary;
    int value = 0;
    std::optional<QualityDimension> dimension;

    bool operator==(const AnnotationRecord&) const = default;
};

// Throws Error(schema_violation) on out-of-range values or a missing dimension.
void validate(const AnnotationRecord& r);

nlohmann::json to_json(const AnnotationRecord& r);
AnnotationRecord record_from_json(const nlohmann::json& j);
std::vector<AnnotationRecord> load_records(const std::filesystem::path& path);

// 2x2 agreement table between annotators A and B on binary labels.
//   a = both 1, b = A 1 / B 0, c = A 0 / B 1, d = both 0
struct BinaryConfusion {
    std::int64_t a = 0, b = 0, c = 0, d = 0;
    std::int64_t total() const { return a + b + c + d; }
};

// kappa = (p_o - p_e) / (1 - p_e), evaluated in integer arithmetic; 1 when
// p_e = p_o = 1. Throws Error(insufficient_overlap) on an empty table.
double cohens_kappa(const BinaryConfusion& m);

// Pairs co-annotated match_binary items of exactly two annotators.
// Throws Error(invalid_argument) for != 2 annotators, insufficient_overlap when
// no item is shared.
BinaryConfusion binary_confusion(std::span<const AnnotationRecord> records);
double cohens_kappa(std::span<const AnnotationRecord> records);

// Reliability data: per unit, the values assigned by whoever rated it.
using Units = std::vector<std::vector<double>>;

// Krippendorff's alpha with the interval (squared difference) metric.
// Units with fewer than two values are ignored. Throws Error(no_variation)
// when the expected disagreement is zero or nothing is pairable.
double krippendorff_alpha_interval(const Units& units);

struct AlphaReport {
    std::optional<double> pooled;  // (item, dimension) as the unit
    std::map<QualityDimension, std::optional<double>> per_dimension;
    std::optional<double> mean_of_dimensions;
    std::vector<std::string> notes;
};

// Quality records only; other tasks are ignored.
AlphaReport krippendorff_alpha(std::span<const AnnotationRecord> records);

nlohmann::json to_json(const AlphaReport& r);

}  // namespace frontpage::agreement
