#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drd {

enum class ErrorKind {
    invalid_argument,
    degenerate_features,
    numerical_failure,
    zero_vector,
    degenerate_test,
    pretraining_failure,
    not_found,
    validation,
    io,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        fail(ErrorKind::invalid_argument, message);
    }
}

}  // namespace drd
