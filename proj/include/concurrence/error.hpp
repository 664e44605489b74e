#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace concurrence {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    config = 2,          ///< invalid parameters or preconditions
    data_integrity = 3,  ///< corrupt files, overlapping splits
    numeric = 4,         ///< degenerate statistics, non-finite values
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, std::string code = {})
        : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}
    ErrorKind kind() const noexcept { return kind_; }
    /// Short machine-readable reason, e.g. "bad_magic"; may be empty.
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

inline Error config_error(const std::string& what) { return Error(ErrorKind::config, what); }
inline Error numeric_error(const std::string& what) { return Error(ErrorKind::numeric, what); }
inline Error integrity_error(const std::string& what, std::string code = {}) {
    return Error(ErrorKind::data_integrity, what, std::move(code));
}

}  // namespace concurrence
