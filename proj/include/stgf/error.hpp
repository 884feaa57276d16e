#pragma once

#include <stdexcept>
#include <string>

namespace stgf {

// Broad error families; the CLI maps each family to an exit code.
enum class ErrorKind {
    Dimension,
    Contract,
    Numerical,
    DegenerateGraph,
    Parameter,
    Convergence,
    Calibration,
    Format,
    Data,
    Config,
    Usage,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define STGF_DEFINE_ERROR(Name, Kind)                                             \
    class Name : public Error {                                                   \
    public:                                                                       \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}  \
    };

STGF_DEFINE_ERROR(DimensionError, Dimension)
STGF_DEFINE_ERROR(ContractError, Contract)
STGF_DEFINE_ERROR(NumericalError, Numerical)
STGF_DEFINE_ERROR(DegenerateGraphError, DegenerateGraph)
STGF_DEFINE_ERROR(ParameterError, Parameter)
STGF_DEFINE_ERROR(CalibrationError, Calibration)
STGF_DEFINE_ERROR(FormatError, Format)
STGF_DEFINE_ERROR(DataError, Data)
STGF_DEFINE_ERROR(ConfigError, Config)
STGF_DEFINE_ERROR(UsageError, Usage)
STGF_DEFINE_ERROR(IoError, Io)

#undef STGF_DEFINE_ERROR

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_change)
        : Error(ErrorKind::Convergence, what), last_change_(last_change) {}
    double last_change() const noexcept { return last_change_; }

private:
    double last_change_;
};

/// Process exit code for an error family: 2 usage/config, 3 data/format, 4 numerical.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace stgf
