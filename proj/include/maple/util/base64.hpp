#pragma once

#include <string>
#include <string_view>

namespace maple::util {

std::string base64_encode(std::string_view bytes);

// Throws std::runtime_error on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace maple::util
