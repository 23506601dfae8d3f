#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "termmap/concept_store.hpp"

namespace termmap {

struct ScoredConcept {
  Concept entry;
  double similarity = 0.0;  // [0, 100]
};

/// Minimal number of single-character insertions and deletions turning `a`
/// into `b`, after ASCII lowercasing. Strings are compared by Unicode code
/// point when they are valid UTF-8 and byte-wise otherwise.
std::size_t indel_distance(std::string_view a, std::string_view b);

/// 100 * (1 - indel_distance / (|a| + |b|)), lengths in code points.
/// Throws InvalidInput when either side is empty.
double indel_similarity(std::string_view a, std::string_view b);

/// Candidates scoring at least `threshold`, best first; equal scores are
/// ordered by concept_id.
std::vector<ScoredConcept> rank_candidates(std::string_view search_term,
                                           const std::vector<Concept>& candidates,
                                           double threshold);

}  // namespace termmap
