#pragma once

#include <stdexcept>
#include <string>

namespace gdann {

enum class ErrorKind {
    invalid_argument,  // caller violated a precondition
    format,            // malformed or inconsistent file / data
    io,                // operating-system level failure
    invariant,         // internal invariant broken
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorKind::invalid_argument, what);
}

}  // namespace gdann
