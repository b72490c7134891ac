#include "frontpage/error.hpp"

namespace frontpage {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::malformed_document: return "malformed-document";
        case Errc::schema_violation: return "schema-violation";
        case Errc::duplicate_page: return "duplicate-page";
        case Errc::no_reference: return "no-reference";
        case Errc::mismatched_issues: return "mismatched-issues";
        case Errc::empty_corpus: return "empty-corpus";
        case Errc::degenerate_labels: return "degenerate-labels";
        case Errc::provider_unavailable: return "provider-unavailable";
        case Errc::coverage_gap: return "coverage-gap";
        case Errc::too_short: return "too-short";
        case Errc::empty_sources: return "empty-sources";
        case Errc::empty_input: return "empty-input";
        case Errc::insufficient_overlap: return "insufficient-overlap";
        case Errc::no_variation: return "no-variation";
        case Errc::missing_slot: return "missing-slot";
        case Errc::endpoint_unavailable: return "endpoint-unavailable";
        case Errc::rate_limited: return "rate-limited";
        case Errc::unparseable_score: return "unparseable-score";
        case Errc::dangling_reference: return "dangling-reference";
        case Errc::empty_dataset: return "empty-dataset";
        case Errc::not_assigned: return "not-assigned";
        case Errc::incomplete_values: return "incomplete-values";
        case Errc::duplicate: return "duplicate";
        case Errc::unknown_task: return "unknown-task";
        case Errc::io_error: return "io-error";
        case Errc::invalid_argument: return "invalid-argument";
        case Errc::usage: return "usage";
    }
    return "unknown";
}

}  // namespace frontpage
