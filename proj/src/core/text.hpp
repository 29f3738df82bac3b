#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the parsers.
namespace mt2ie::text {

std::string_view trim(std::string_view s);
// Removes one pair of matching surrounding quotes ("", '', or curly doubles).
std::string_view strip_quotes(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace mt2ie::text
