#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termmap/concept_store.hpp"
#include "termmap/embedding.hpp"
#include "termmap/error.hpp"

namespace termmap {

struct EmbeddingRecord {
  ConceptId concept_id = 0;
  std::vector<float> vector;
};

struct VectorHit {
  ConceptId concept_id = 0;
  std::string concept_name;
  double score = 0.0;  // dot product of unit vectors, clamped to [-1, 1]

  bool operator==(const VectorHit&) const = default;
};

/// Thrown when the embedding provider fails part-way through a build.
class BuildError : public Error {
 public:
  BuildError(const std::string& message, std::size_t completed)
      : Error(ErrorCode::BuildFailed, message), completed_(completed) {}

  std::size_t completed() const noexcept { return completed_; }

 private:
  std::size_t completed_;
};

/// Exact (exhaustive scan) dense index over concept-name embeddings.
/// Immutable once built or loaded.
class VectorIndex {
 public:
  VectorIndex() = default;

  /// Embeds every concept name. Records are kept in concept_id order so that
  /// identical inputs give byte-identical files.
  static VectorIndex build(std::vector<Concept> concepts,
                           const EmbeddingProvider& provider,
                           std::size_t batch_size = 256);

  /// Loads records directly; vectors must be unit length.
  static VectorIndex from_records(std::vector<EmbeddingRecord> records,
                                  std::vector<std::string> names,
                                  std::string fingerprint);

  static VectorIndex load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool loaded() const noexcept { return dimension_ > 0; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }

  ConceptId id_at(std::size_t i) const { return ids_.at(i); }
  const std::string& name_at(std::size_t i) const { return names_.at(i); }
  std::span<const float> vector_at(std::size_t i) const;

  /// Top `k` by dot product with `query` (already unit length). Ties go to
  /// the smaller concept_id.
  std::vector<VectorHit> search(std::span<const float> query, std::size_t k) const;

  /// Embeds `text` with `provider` and searches. Throws DimensionMismatch if
  /// the provider's dimension differs from the index's.
  std::vector<VectorHit> query_top_k(std::string_view text, std::size_t k,
                                     const EmbeddingProvider& provider) const;

 private:
  std::size_t dimension_ = 0;
  std::string fingerprint_;
  std::vector<ConceptId> ids_;
  std::vector<std::string> names_;
  std::vector<float> matrix_;  // row-major, size() x dimension()
};

/// Hits with score >= threshold, order preserved.
std::vector<VectorHit> exceeds_exact_threshold(const std::vector<VectorHit>& hits,
                                               double threshold);

}  // namespace termmap
