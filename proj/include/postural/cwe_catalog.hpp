#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace postural {

/// MITRE CWE names for the weaknesses this tool references (the network
/// weakness list plus the most common memory, injection and crypto entries).
std::optional<std::string_view> cwe_name(int id) noexcept;

/// Name with the trailing parenthesised alias removed, e.g.
/// "Improper Neutralization of Input During Web Page Generation".
std::optional<std::string> cwe_short_name(int id);

}  // namespace postural
