#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cesoforge {

// Every domain failure carries one of these codes; the service maps them onto
// HTTP statuses and the CLI onto exit codes.
enum class Errc {
    missing_mandatory_extension,
    invalid_property,
    unknown_endpoint,
    illegal_triple,
    malformed_bundle,
    invariant_violation,
    validation_error,
    storage_failure,
    fetch_failure,
    parse_failure,
    bad_span,
    unknown_category,
    length_mismatch,
    unknown_label,
    degenerate_agreement,
    immature_source,
    no_candidates,
    unknown_fragment_id,
    empty_selection,
    series_too_short,
    unresolved_incident,
    validation_failure,
    not_a_scenario_graph,
    adapter_unavailable,
    io_failure,
    precondition_violation,
    not_found,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }
    std::string_view code_name() const noexcept { return errc_name(code_); }

private:
    Errc code_;
};

}  // namespace cesoforge
