#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcmg {

enum class ErrorKind {
    InvalidGraph,
    InvalidParameter,
    NonPositiveVoltage,
    MissingGains,
    DimensionMismatch,
    RankDeficient,
    SingularNominal,
    NoCertificate,
    NoConvergence,
    OutOfBand,
    SingularGamma,
    NotSettled,
    ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when a bus voltage drops to or below the configured floor.
class VoltageError : public Error {
public:
    VoltageError(int bus, double voltage, const std::string& message)
        : Error(ErrorKind::NonPositiveVoltage, message), bus_(bus), voltage_(voltage) {}

    int bus() const noexcept { return bus_; }
    double voltage() const noexcept { return voltage_; }

private:
    int bus_;
    double voltage_;
};

}  // namespace dcmg
