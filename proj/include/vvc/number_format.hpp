#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vvc {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return {buf, ptr};
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    return v;
}

}  // namespace vvc
