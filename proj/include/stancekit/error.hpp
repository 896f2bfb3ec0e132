#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace stancekit {

/// Runtime failure raised by any stancekit module. The module tag is kept
/// separate so front-ends can report which subsystem failed.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message)
        : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Configuration problems (bad key, missing file, unparseable value).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

[[noreturn]] inline void fail(const std::string& module, const std::string& message) {
    throw Error(module, message);
}

} // namespace stancekit
