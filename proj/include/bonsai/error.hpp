#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bonsai {

enum class ErrorKind {
    precondition,
    parse,
    backend,
    transport,    // retryable
    script_miss,  // mock backend has no entry for a prompt
    config,
    io,
    not_found,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept { return kind_ == ErrorKind::transport; }

    /// Same error with `context` prepended, e.g. the node path or stage name.
    Error with_context(std::string_view context) const {
        return Error(kind_, std::string(context) + ": " + what());
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, const std::string& message) {
    if (!condition) throw Error(ErrorKind::precondition, message);
}

}  // namespace bonsai
