#pragma once

#include <charconv>
#include <string>

namespace coreg {

/// Shortest round-trip decimal form of a double; locale independent.
inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace coreg
