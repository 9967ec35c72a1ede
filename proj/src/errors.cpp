#include "cesoforge/errors.hpp"

namespace cesoforge {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::missing_mandatory_extension: return "MissingMandatoryExtension";
        case Errc::invalid_property: return "InvalidProperty";
        case Errc::unknown_endpoint: return "UnknownEndpoint";
        case Errc::illegal_triple: return "IllegalTriple";
        case Errc::malformed_bundle: return "MalformedBundle";
        case Errc::invariant_violation: return "InvariantViolation";
        case Errc::validation_error: return "ValidationError";
        case Errc::storage_failure: return "StorageFailure";
        case Errc::fetch_failure: return "FetchFailure";
        case Errc::parse_failure: return "ParseFailure";
        case Errc::bad_span: return "BadSpan";
        case Errc::unknown_category: return "UnknownCategory";
        case Errc::length_mismatch: return "LengthMismatch";
        case Errc::unknown_label: return "UnknownLabel";
        case Errc::degenerate_agreement: return "DegenerateAgreement";
        case Errc::immature_source: return "ImmatureSource";
        case Errc::no_candidates: return "NoCandidates";
        case Errc::unknown_fragment_id: return "UnknownFragmentId";
        case Errc::empty_selection: return "EmptySelection";
        case Errc::series_too_short: return "SeriesTooShort";
        case Errc::unresolved_incident: return "UnresolvedIncident";
        case Errc::validation_failure: return "ValidationFailure";
        case Errc::not_a_scenario_graph: return "NotAScenarioGraph";
        case Errc::adapter_unavailable: return "AdapterUnavailable";
        case Errc::io_failure: return "IoFailure";
        case Errc::precondition_violation: return "PreconditionViolation";
        case Errc::not_found: return "NotFound";
    }
    return "Unknown";
}

}  // namespace cesoforge
