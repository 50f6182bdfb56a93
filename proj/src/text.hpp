#pragma once

// Small string helpers shared by the parsers.

#include <string>
#include <string_view>
#include <vector>

namespace rarekg::detail {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
// Lowercase, trim, and collapse internal whitespace runs to one space.
std::string normalize_key(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace rarekg::detail
