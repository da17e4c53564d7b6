#pragma once

#include <stdexcept>
#include <string>

namespace liftlab {

/// Base class for every error raised by the library. Errors carry a stable
/// kind name so the CLI can report and classify them without RTTI games.
class Error : public std::exception {
public:
    Error(std::string kind, std::string message)
        : kind_(std::move(kind)), message_(std::move(message)) {
        rebuild();
    }

    const char* what() const noexcept override { return full_.c_str(); }
    const std::string& kind() const noexcept { return kind_; }
    const std::string& message() const noexcept { return message_; }

    /// Prefixes additional context (e.g. "frame 12") and keeps the dynamic
    /// type, so callers can `e.add_context(...); throw;`.
    void add_context(const std::string& context) {
        message_ = context + ": " + message_;
        rebuild();
    }

private:
    void rebuild() { full_ = kind_ + ": " + message_; }

    std::string kind_;
    std::string message_;
    std::string full_;
};

#define LIFTLAB_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                                 \
    public:                                                                     \
        explicit Name(std::string message) : Error(#Name, std::move(message)) {} \
    };

// Ingestion and labels.
LIFTLAB_DEFINE_ERROR(ParseError)
LIFTLAB_DEFINE_ERROR(SchemaError)
LIFTLAB_DEFINE_ERROR(TimeOrderError)
LIFTLAB_DEFINE_ERROR(OutOfRangeError)
LIFTLAB_DEFINE_ERROR(LabelConflictError)
LIFTLAB_DEFINE_ERROR(DegenerateSignalError)
LIFTLAB_DEFINE_ERROR(SensorMissingError)
LIFTLAB_DEFINE_ERROR(NotStillError)

// Datasets.
LIFTLAB_DEFINE_ERROR(EmptyDatasetError)
LIFTLAB_DEFINE_ERROR(ClassMissingError)
LIFTLAB_DEFINE_ERROR(SplitError)

// Filters.
LIFTLAB_DEFINE_ERROR(NormError)
LIFTLAB_DEFINE_ERROR(FreefallError)
LIFTLAB_DEFINE_ERROR(SingularUpdateError)

// Model.
LIFTLAB_DEFINE_ERROR(ShapeError)
LIFTLAB_DEFINE_ERROR(InputError)
LIFTLAB_DEFINE_ERROR(DivergenceError)

// Configuration / generation.
LIFTLAB_DEFINE_ERROR(ConfigError)
LIFTLAB_DEFINE_ERROR(SpecError)

#undef LIFTLAB_DEFINE_ERROR

} // namespace liftlab
