#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace mapai {

// Canonical serialization: no whitespace, keys emitted in insertion order
// (callers insert schema fields in fixed order and map keys sorted), numbers
// rendered as the shortest decimal that round-trips the binary64 value.
// Equal values always produce equal bytes, which is what makes hashes and
// certificates replayable.
std::string canonical_dump(const nlohmann::ordered_json& value);

// Shortest round-trip rendering of one double (integral values drop the
// trailing ".0"). Non-finite input is rejected.
std::string canonical_number(double value);

// Lowercase hex SHA-256 digest of a byte string.
std::string sha256_hex(std::string_view bytes);

}  // namespace mapai
