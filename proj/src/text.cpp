#include "termmap/text.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "termmap/error.hpp"

namespace termmap {

namespace {

constexpr std::array<std::string_view, 11> kStopWords = {
    "a", "an", "and", "by", "for", "in", "of", "or", "the", "to", "with"};

bool is_ascii_alnum(char c) noexcept {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

bool is_ascii_punct(char c) noexcept {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x21 && u <= 0x7e && !is_ascii_alnum(c);
}

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

std::span<const std::string_view> stop_words() noexcept { return kStopWords; }

bool is_stop_word(std::string_view token) noexcept {
  return std::find(kStopWords.begin(), kStopWords.end(), token) !=
         kStopWords.end();
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::string buf = to_lower_ascii(text);
  const std::string_view src(text);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const char c = src[i];
    if (!is_ascii_punct(c)) continue;
    if ((c == '-' || c == '/') && i > 0 && i + 1 < src.size() &&
        is_ascii_alnum(src[i - 1]) && is_ascii_alnum(src[i + 1])) {
      continue;
    }
    buf[i] = ' ';
  }

  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < buf.size()) {
    while (pos < buf.size() && is_space(buf[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < buf.size() && !is_space(buf[pos])) ++pos;
    if (pos > start) tokens.emplace_back(buf.substr(start, pos - start));
  }
  return tokens;
}

SearchQuery preprocess_search_term(std::string_view raw) {
  SearchQuery query;
  std::unordered_set<std::string> seen;
  for (auto& token : tokenize(raw)) {
    if (is_stop_word(token)) continue;
    if (!seen.insert(token).second) continue;
    query.terms.push_back(std::move(token));
  }
  if (query.terms.empty()) {
    throw Error(ErrorCode::EmptyQuery,
                "search term has no words left after removing punctuation "
                "and stop words: \"" + std::string(raw) + "\"");
  }
  for (std::size_t i = 0; i < query.terms.size(); ++i) {
    if (i > 0) query.rendered += kTermSeparator;
    query.rendered += query.terms[i];
  }
  return query;
}

}  // namespace termmap
