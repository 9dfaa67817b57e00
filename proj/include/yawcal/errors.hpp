#pragma once

#include <stdexcept>
#include <string>

namespace yawcal {

// Failure taxonomy. The CLI maps kinds onto process exit codes:
// validation-family -> 1, fit-family -> 2, io -> 3.
enum class ErrorKind {
    invalid_input,      // malformed values, broken invariants, bad arguments
    schema,             // missing or mismatched columns / JSON keys
    parse,              // unparseable cell or token
    ordering,           // timestamps not strictly increasing
    insufficient_data,  // too few records/samples for the requested operation
    out_of_range,       // query outside a model's valid domain
    undefined_metric,   // metric has no value for this input (e.g. zero norm)
    domain,             // math precondition violated (e.g. cos factor <= 0)
    ill_conditioned,    // fit matrix rank-deficient or result unphysical
    fit_failure,        // iterative solver did not converge
    io,                 // file system problem
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    // True for kinds that indicate bad input rather than solver or io trouble.
    bool is_validation() const noexcept {
        switch (kind_) {
        case ErrorKind::ill_conditioned:
        case ErrorKind::fit_failure:
        case ErrorKind::io:
            return false;
        default:
            return true;
        }
    }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::schema: return "schema";
    case ErrorKind::parse: return "parse";
    case ErrorKind::ordering: return "ordering";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::out_of_range: return "out_of_range";
    case ErrorKind::undefined_metric: return "undefined_metric";
    case ErrorKind::domain: return "domain";
    case ErrorKind::ill_conditioned: return "ill_conditioned";
    case ErrorKind::fit_failure: return "fit_failure";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

}  // namespace yawcal
