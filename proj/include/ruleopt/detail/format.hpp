#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>

#include "ruleopt/errors.hpp"

namespace ruleopt::detail {

/// Shortest round-trip decimal representation of a double ("12", "0.1", ...).
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError("cannot parse number '" + std::string(s) + "' in " +
                        std::string(what));
    return v;
}

inline long parse_long(std::string_view s, std::string_view what) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError("cannot parse integer '" + std::string(s) + "' in " +
                        std::string(what));
    return v;
}

} // namespace ruleopt::detail
