#pragma once

#include <string_view>

namespace hra::detail {

// Contents of a file from data/, compiled in after checksum verification.
// Throws std::out_of_range for unknown names.
std::string_view embedded_file(std::string_view name);

}  // namespace hra::detail
