#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "termmap/concept_store.hpp"
#include "termmap/vector_index.hpp"

namespace testsupport {

inline std::filesystem::path fixture_dir() { return TERMMAP_FIXTURE_DIR; }

inline termmap::VocabularyFiles fixture_files() {
  const auto d = fixture_dir();
  return {d / "CONCEPT.tsv", d / "CONCEPT_SYNONYM.tsv", d / "CONCEPT_ANCESTOR.tsv",
          d / "CONCEPT_RELATIONSHIP.tsv"};
}

inline termmap::ConceptStore fixture_store() {
  return termmap::ConceptStore::from_files(fixture_files());
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("termmap-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

/// Insert/delete edit distance by the textbook O(n*m) dynamic program.
inline std::size_t dp_indel_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1];
      } else {
        cur[j] = std::min(prev[j], cur[j - 1]) + 1;
      }
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double dp_indel_similarity(std::string_view a, std::string_view b) {
  const auto la = ascii_lower(a);
  const auto lb = ascii_lower(b);
  const double total = static_cast<double>(la.size() + lb.size());
  return 100.0 * (1.0 - static_cast<double>(dp_indel_distance(la, lb)) / total);
}

/// Scores every stored vector and sorts; independent of VectorIndex::search.
inline std::vector<termmap::VectorHit> brute_force_top_k(const termmap::VectorIndex& index,
                                                         const std::vector<float>& query,
                                                         std::size_t k) {
  std::vector<termmap::VectorHit> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto v = index.vector_at(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      dot += static_cast<double>(v[j]) * static_cast<double>(query[j]);
    }
    dot = std::clamp(dot, -1.0, 1.0);
    all.push_back({index.id_at(i), index.name_at(i), dot});
  }
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.concept_id < y.concept_id;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

inline std::string random_string(std::mt19937_64& rng, std::size_t max_len,
                                 std::string_view alphabet) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

/// Pronounceable synthetic drug-like names, unique per index.
inline std::string synthetic_name(std::size_t i) {
  static constexpr std::string_view syllables[] = {
      "ba", "ce", "di", "fo", "gu", "ha", "ke", "li", "mo", "nu", "pa", "re",
      "si", "to", "vu", "xa", "za", "lo", "mi", "ne", "ro", "ta", "ve", "qui"};
  constexpr std::size_t n = std::size(syllables);
  std::string name;
  std::size_t x = i;
  do {
    name += syllables[x % n];
    x /= n;
  } while (x > 0);
  name += "mab";
  static constexpr std::string_view forms[] = {"", " 10 MG", " oral tablet", " 5 MG/ML injection",
                                               " topical cream"};
  name += forms[(i * 7) % std::size(forms)];
  return name;
}

inline std::vector<termmap::Concept> synthetic_concepts(std::size_t n,
                                                        termmap::ConceptId first_id = 1000000) {
  std::vector<termmap::Concept> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    termmap::Concept c;
    c.concept_id = first_id + static_cast<termmap::ConceptId>(i);
    c.concept_name = synthetic_name(i);
    c.vocabulary_id = "RxNorm";
    c.concept_code = std::to_string(100000 + i);
    c.domain_id = "Drug";
    c.standard_concept = 'S';
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<float> random_unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = g(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

}  // namespace testsupport
