#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace maple::util {

std::string trim(std::string_view s);

// Collapses runs of internal whitespace to a single space (after trimming).
std::string collapse_ws(std::string_view s);

std::string to_lower(std::string_view s);

// trim + collapse + case-fold; the canonical form used for dedup keys.
std::string canonical_key(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

// Case-insensitive substring test.
bool icontains(std::string_view haystack, std::string_view needle);

std::vector<std::string> split_lines(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);

// Replaces every occurrence of `from` in `s`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace maple::util
