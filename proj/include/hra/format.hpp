#pragma once

#include <string>

namespace hra {

// Shortest text that parses back to the identical double (at most 17
// significant digits).
std::string format_full(double value);
// Console output, 4 significant digits.
std::string format_short(double value);

}  // namespace hra
