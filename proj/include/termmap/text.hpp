#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace termmap {

/// Separator placed between terms of a rendered query.
inline constexpr std::string_view kTermSeparator = " | ";

/// The fixed English stop-word list removed from search terms.
std::span<const std::string_view> stop_words() noexcept;
bool is_stop_word(std::string_view token) noexcept;

/// ASCII lowercase; bytes >= 0x80 pass through untouched.
std::string to_lower_ascii(std::string_view s);

std::string_view trim(std::string_view s) noexcept;

/// Lowercases, blanks out punctuation and splits on whitespace.
///
/// Every ASCII punctuation character is replaced by a space, except '-' and
/// '/' when both neighbours are ASCII letters or digits ("omega-3",
/// "acetaminophen/codeine"). Stop words are kept; duplicates are kept.
std::vector<std::string> tokenize(std::string_view text);

struct SearchQuery {
  std::vector<std::string> terms;
  std::string rendered;
  std::optional<std::vector<std::string>> vocabulary_filter;
  bool include_synonyms = false;
};

/// tokenize(), then drop stop words and repeated tokens (first occurrence
/// wins). Throws Error{EmptyQuery} when nothing is left.
SearchQuery preprocess_search_term(std::string_view raw);

}  // namespace termmap
