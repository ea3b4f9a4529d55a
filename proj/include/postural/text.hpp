#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the parsers, the extractor and the corpus
// builder. All of them operate on bytes; non-ASCII bytes pass through as
// word characters.

namespace postural::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Corpus cleaning: lowercase, every ASCII punctuation character (hyphens
/// included) becomes a separator, stop words are kept.
std::vector<std::string> tokenize(std::string_view s);

/// Phrase normalization for node ports: lowercase, punctuation removed,
/// whitespace collapsed. A '-' or '.' sitting between two alphanumerics is
/// kept so product names such as "ec-cube 3.0.18" survive intact.
std::string normalize_phrase(std::string_view s);

bool is_word_char(char c) noexcept;

/// Whole-word occurrences of `needle` inside `haystack` (both already
/// lowercased). Returns start offsets.
std::vector<std::size_t> find_whole_word(std::string_view haystack,
                                         std::string_view needle);

std::uint64_t fnv1a64(std::string_view data) noexcept;
std::string hex64(std::uint64_t value);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace postural::text
