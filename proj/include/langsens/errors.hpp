#pragma once

#include <stdexcept>
#include <string>

namespace langsens {

// Exit-code contract: 0 success, 2 usage, 3 numeric failure,
// 4 divergence-dominated run.

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 2;
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 3;
};

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 4;
};

}  // namespace langsens
