#include "termmap/fuzzy.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <unordered_map>

#include "termmap/error.hpp"

namespace termmap {

namespace {

/// Decodes UTF-8 into code points, ASCII-lowercased. Falls back to one
/// unit per byte if the input is not valid UTF-8.
std::u32string to_units(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.clear();
      for (unsigned char c : s) {
        out.push_back(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
      }
      return out;
    }
    if (cp >= U'A' && cp <= U'Z') cp = cp - U'A' + U'a';
    out.push_back(cp);
    i += len;
  }
  return out;
}

/// Per-character match masks of a pattern, split into 64-bit blocks.
class PatternMasks {
 public:
  explicit PatternMasks(const std::u32string& pattern)
      : blocks_((pattern.size() + 63) / 64), low_(256 * blocks_, 0) {
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      const auto bit = std::uint64_t{1} << (i % 64);
      const auto block = i / 64;
      const char32_t c = pattern[i];
      if (c < 256) {
        low_[c * blocks_ + block] |= bit;
      } else {
        auto& masks = high_[c];
        masks.resize(blocks_, 0);
        masks[block] |= bit;
      }
    }
  }

  std::size_t blocks() const noexcept { return blocks_; }

  std::uint64_t get(char32_t c, std::size_t block) const noexcept {
    if (c < 256) return low_[c * blocks_ + block];
    auto it = high_.find(c);
    return it == high_.end() ? 0 : it->second[block];
  }

 private:
  std::size_t blocks_;
  std::vector<std::uint64_t> low_;
  std::unordered_map<char32_t, std::vector<std::uint64_t>> high_;
};

/// Bit-parallel longest common subsequence (Allison-Dix / Hyyro).
std::size_t lcs_length(const std::u32string& pattern, const std::u32string& text) {
  if (pattern.empty() || text.empty()) return 0;
  const PatternMasks masks(pattern);
  const auto nblocks = masks.blocks();
  std::vector<std::uint64_t> v(nblocks, ~std::uint64_t{0});
  for (const char32_t c : text) {
    std::uint64_t carry = 0;
    for (std::size_t w = 0; w < nblocks; ++w) {
      const std::uint64_t u = v[w] & masks.get(c, w);
      std::uint64_t sum = v[w] + carry;
      std::uint64_t next_carry = sum < carry;
      sum += u;
      next_carry |= sum < u;
      v[w] = sum | (v[w] - u);
      carry = next_carry;
    }
  }
  std::size_t lcs = 0;
  for (std::size_t w = 0; w < nblocks; ++w) {
    lcs += static_cast<std::size_t>(std::popcount(~v[w]));
  }
  return lcs;
}

}  // namespace

std::size_t indel_distance(std::string_view a, std::string_view b) {
  const auto ua = to_units(a);
  const auto ub = to_units(b);
  const auto& shorter = ua.size() <= ub.size() ? ua : ub;
  const auto& longer = ua.size() <= ub.size() ? ub : ua;
  return ua.size() + ub.size() - 2 * lcs_length(shorter, longer);
}

double indel_similarity(std::string_view a, std::string_view b) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::InvalidInput,
                "indel_similarity requires two non-empty strings");
  }
  const auto ua = to_units(a);
  const auto ub = to_units(b);
  const auto& shorter = ua.size() <= ub.size() ? ua : ub;
  const auto& longer = ua.size() <= ub.size() ? ub : ua;
  const auto total = ua.size() + ub.size();
  const auto distance = total - 2 * lcs_length(shorter, longer);
  return 100.0 * (1.0 - static_cast<double>(distance) /
                            static_cast<double>(total));
}

std::vector<ScoredConcept> rank_candidates(std::string_view search_term,
                                           const std::vector<Concept>& candidates,
                                           double threshold) {
  if (!(threshold >= 0.0 && threshold <= 100.0)) {
    throw Error(ErrorCode::InvalidInput, "similarity threshold must be in [0, 100]");
  }
  std::vector<ScoredConcept> ranked;
  for (const auto& c : candidates) {
    const double score = indel_similarity(search_term, c.concept_name);
    if (score >= threshold) ranked.push_back({c, score});
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const ScoredConcept& x, const ScoredConcept& y) {
              if (x.similarity != y.similarity) return x.similarity > y.similarity;
              return x.entry.concept_id < y.entry.concept_id;
            });
  return ranked;
}

}  // namespace termmap
