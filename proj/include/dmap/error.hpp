#pragma once

#include <stdexcept>
#include <string>

namespace dmap {

/// Broad failure categories; the CLI maps each to an exit code.
enum class ErrorKind {
    validation,  // bad input shape, unknown ids, malformed config
    numerical,   // singular or ill-conditioned systems
    io,          // unreadable or unwritable files
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define DMAP_DEFINE_ERROR(Name, Kind)                                              \
    class Name : public Error {                                                    \
    public:                                                                        \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}   \
    }

DMAP_DEFINE_ERROR(InvalidArgument, validation);
DMAP_DEFINE_ERROR(DimensionMismatch, validation);
DMAP_DEFINE_ERROR(MissingClass, validation);
DMAP_DEFINE_ERROR(UnknownLabel, validation);
DMAP_DEFINE_ERROR(UnknownClass, validation);
DMAP_DEFINE_ERROR(MissingInstance, validation);
DMAP_DEFINE_ERROR(EmptyTrainingSet, validation);
DMAP_DEFINE_ERROR(EmptyTestSet, validation);
DMAP_DEFINE_ERROR(InfeasibleConfig, validation);
DMAP_DEFINE_ERROR(ShapeMismatch, validation);
DMAP_DEFINE_ERROR(SingularSystem, numerical);
DMAP_DEFINE_ERROR(IoError, io);

#undef DMAP_DEFINE_ERROR

/// Malformed text input, with the 1-based position of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, std::size_t column, const std::string& msg)
        : Error(ErrorKind::validation,
                source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace dmap
