#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

#include "fingersim/errors.hpp"

namespace fingersim {

// Locale-free, shortest round-trip double formatting.  Every number written to
// a data file (CSV, JSON) goes through here so that re-reading reproduces the
// exact bit pattern and identical runs produce identical bytes.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValidationError("not a number: '" + std::string(s) + "' (" + context + ")");
    }
    return v;
}

inline std::int64_t parse_int(std::string_view s, const std::string& context) {
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValidationError("not an integer: '" + std::string(s) + "' (" + context + ")");
    }
    return v;
}

}  // namespace fingersim
