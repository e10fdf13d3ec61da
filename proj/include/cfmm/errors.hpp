#pragma once

// ---------------------------------------------------------------------------
// Error taxonomy shared by all cfmm modules. Every throwing operation uses
// one of these types so callers (and the CLI) can map failures to exit codes
// and machine-readable reports without string matching.
// ---------------------------------------------------------------------------

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cfmm {

// argument lies outside the reserve domain of the curve
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// price lies outside the attainable marginal-price range
struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// swap order is infeasible against the current pool state
struct RejectedOrder : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// pool / path / scenario parameters violate a structural precondition
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// malformed input bytes (CSV, JSON); message carries the location
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// operation not meaningful in the current mode (e.g. LVR decomposition with fees on)
struct ModeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// filesystem failure while reading inputs or writing artifacts
struct IOError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// one field-level violation found while validating a scenario config
struct Violation {
    std::string field;    // dotted path, e.g. "pool.tau"
    std::string message;
};

// aggregate of all violations found in one validation pass
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(std::vector<Violation> violations)
        : std::runtime_error(format(violations)), violations_(std::move(violations)) {}

    const std::vector<Violation>& violations() const { return violations_; }

  private:
    static std::string format(const std::vector<Violation>& vs) {
        std::string out = "config invalid:";
        for (const auto& v : vs) out += "\n  " + v.field + ": " + v.message;
        return out;
    }

    std::vector<Violation> violations_;
};

}  // namespace cfmm
