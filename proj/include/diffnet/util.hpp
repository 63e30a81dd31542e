#pragma once

#include <cstdint>
#include <string>

namespace diffnet {

// SHA-1 hex digest; used to fingerprint resolved configs in manifests.
std::string sha1_hex(const std::string& data);

// shortest round-trippable decimal form of a double
std::string format_double(double value);

}  // namespace diffnet
