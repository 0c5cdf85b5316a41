#pragma once

// Small parsing helpers shared by the CSV and config readers.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hra::detail {

std::string_view trim(std::string_view s) noexcept;
bool iequals(std::string_view a, std::string_view b) noexcept;
std::vector<std::string> split(std::string_view line, char sep);
std::optional<double> parse_double(std::string_view s) noexcept;
std::optional<long long> parse_int(std::string_view s) noexcept;

// Reads lines, stripping a trailing '\r'.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}
    bool next(std::string& line);
    std::size_t line_number() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

}  // namespace hra::detail
