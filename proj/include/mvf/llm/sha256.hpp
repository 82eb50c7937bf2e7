#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mvf {

// FIPS 180-4 SHA-256 of the full input, as 64 lowercase hex characters.
std::string sha256_hex(std::string_view data);

}  // namespace mvf
