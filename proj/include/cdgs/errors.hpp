#pragma once

#include <stdexcept>
#include <string>

namespace cdgs {

// Broad failure classes. The CLI maps these onto exit codes.
enum class ErrorKind {
    config,     // invalid parameters or option conflicts
    data,       // unreadable, malformed or inconsistent input
    numerical,  // factorization or convergence failure
};

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define CDGS_DEFINE_ERROR(name, error_kind)                          \
    class name : public Error                                       \
    {                                                               \
    public:                                                         \
        explicit name(const std::string& what)                      \
            : Error(ErrorKind::error_kind, #name ": " + what)       \
        {}                                                          \
    };

CDGS_DEFINE_ERROR(ArgumentError, config)
CDGS_DEFINE_ERROR(ConfigError, config)
CDGS_DEFINE_ERROR(DimensionError, config)
CDGS_DEFINE_ERROR(ParseError, data)
CDGS_DEFINE_ERROR(ShapeError, data)
CDGS_DEFINE_ERROR(LabelError, data)
CDGS_DEFINE_ERROR(SingularPencil, numerical)
CDGS_DEFINE_ERROR(SingularMatrix, numerical)
CDGS_DEFINE_ERROR(ConvergenceError, numerical)

#undef CDGS_DEFINE_ERROR

} // namespace cdgs
