#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace riskmdp {

/// Decimal formatting used in output files: 12 significant digits.
inline std::string format12(double x) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.12g", x);
    return buffer;
}

inline double round12(double x) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.12g", x);
    return std::strtod(buffer, nullptr);
}

} // namespace riskmdp
