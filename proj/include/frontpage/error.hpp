#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace frontpage {

// Domain error codes. The string form (see to_string) is what the CLI emits in
// its machine-readable error record.
enum class Errc {
    malformed_document,
    schema_violation,
    duplicate_page,
    no_reference,
    mismatched_issues,
    empty_corpus,
    degenerate_labels,
    provider_unavailable,
    coverage_gap,
    too_short,
    empty_sources,
    empty_input,
    insufficient_overlap,
    no_variation,
    missing_slot,
    endpoint_unavailable,
    rate_limited,
    unparseable_score,
    dangling_reference,
    empty_dataset,
    not_assigned,
    incomplete_values,
    duplicate,
    unknown_task,
    io_error,
    invalid_argument,
    usage,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace frontpage
