#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ettwin {

enum class ErrorKind {
    Validation,
    EmptyInput,
    BehindCamera,
    DegenerateSeries,
    DegenerateCamera,
    KernelTooLarge,
    IllConditioned,
    DegeneratePrediction,
    NoPupil,
    ContaminatedSplit,
    Config,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. `kind` is stable and machine readable; `what()` is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string pointer = {})
        : std::runtime_error(message), kind_(kind), pointer_(std::move(pointer)) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// JSON pointer of the offending config element, empty when not applicable.
    const std::string& pointer() const noexcept { return pointer_; }

private:
    ErrorKind kind_;
    std::string pointer_;
};

}  // namespace ettwin
