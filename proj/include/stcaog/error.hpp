#pragma once

#include <stdexcept>
#include <string>

namespace stcaog {

// Domain failure carrying a stable machine-readable code such as
// "invalid-grammar" or "unparseable-trace". The CLI maps these to exit 1.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace stcaog
