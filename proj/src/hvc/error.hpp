#pragma once

#include <stdexcept>
#include <string>

namespace hvc {

enum class ErrorKind {
    Config,      // bad model/layer configuration, shape mismatch at build time
    Usage,       // API misuse (wrong mode, backward on detached graph, bad CLI args)
    Numeric,     // non-finite values where finite required
    Io,          // file/parse errors
    Format,      // bad magic/version/hash in checkpoint or container
    Truncation,  // entropy payload ended early
    Internal,    // invariant violation inside the library
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

inline void check(bool cond, ErrorKind kind, const std::string& msg) {
    if (!cond) fail(kind, msg);
}

} // namespace hvc
