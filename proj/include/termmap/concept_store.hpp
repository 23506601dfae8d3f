#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "termmap/text.hpp"

namespace termmap {

using ConceptId = std::int64_t;

/// One standard-vocabulary entry.
struct Concept {
  ConceptId concept_id = 0;
  std::string concept_name;
  std::string vocabulary_id;
  std::string concept_code;
  std::string domain_id;
  std::optional<char> standard_concept;

  bool operator==(const Concept&) const = default;
};

struct AncestorLink {
  ConceptId ancestor_concept_id = 0;
  int levels_of_separation = 0;

  bool operator==(const AncestorLink&) const = default;
};

struct RelationshipLink {
  std::string relationship_id;
  ConceptId concept_id_2 = 0;

  bool operator==(const RelationshipLink&) const = default;
};

struct DetailFlags {
  bool synonyms = false;
  bool ancestors = false;
  bool relationships = false;

  bool any() const noexcept { return synonyms || ancestors || relationships; }
  bool operator==(const DetailFlags&) const = default;
};

struct ConceptDetails {
  Concept entry;
  std::vector<std::string> synonyms;
  std::vector<AncestorLink> ancestors;
  std::vector<RelationshipLink> relationships;
};

/// Athena-layout tab-separated vocabulary files.
struct VocabularyFiles {
  std::filesystem::path concepts;
  std::optional<std::filesystem::path> synonyms;
  std::optional<std::filesystem::path> ancestors;
  std::optional<std::filesystem::path> relationships;
};

struct IngestStats {
  std::size_t concepts = 0;
  std::size_t synonyms = 0;
  std::size_t ancestors = 0;
  std::size_t relationships = 0;
  /// Rows dropped across all tables (bad ids, empty names, short rows,
  /// duplicates, links to unknown concepts).
  std::size_t skipped = 0;
};

/// Immutable concept database with an in-memory inverted index over
/// lowercased name tokens. A default-constructed store is "not loaded" and
/// every query on it throws StoreUnavailable.
class ConceptStore {
 public:
  ConceptStore() = default;

  /// Parses vocabulary files. Missing required columns throw IngestError;
  /// malformed rows are skipped and counted in `stats`.
  static ConceptStore from_files(const VocabularyFiles& files,
                                 IngestStats* stats = nullptr);

  static ConceptStore from_concepts(std::vector<Concept> concepts);

  /// Reads a store file written by save(). Throws FormatError.
  static ConceptStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool loaded() const noexcept { return loaded_; }
  std::size_t size() const noexcept { return concepts_.size(); }
  const std::vector<Concept>& concepts() const noexcept { return concepts_; }

  const Concept* find(ConceptId id) const noexcept;
  const std::vector<std::string>& synonyms_of(ConceptId id) const;

  /// OR-of-terms search. Ordered by number of matched terms (descending),
  /// then concept_id (ascending); at most `limit` results.
  std::vector<Concept> text_search(const SearchQuery& query,
                                   std::size_t limit) const;

  /// Throws NotFound for an unknown id. Lists are filled only for enabled
  /// flags.
  ConceptDetails fetch_concept_details(ConceptId id, DetailFlags flags) const;

  void add_synonym(ConceptId id, std::string name);
  void add_ancestor(ConceptId descendant, AncestorLink link);
  void add_relationship(ConceptId id, RelationshipLink link);

 private:
  void require_loaded() const;
  void rebuild_index();
  std::size_t index_of(ConceptId id) const;

  bool loaded_ = false;
  std::vector<Concept> concepts_;  // sorted by concept_id
  std::unordered_map<ConceptId, std::size_t> by_id_;
  std::vector<std::vector<std::string>> synonyms_;
  std::vector<std::vector<AncestorLink>> ancestors_;
  std::vector<std::vector<RelationshipLink>> relationships_;

  // token -> ascending concept positions
  std::unordered_map<std::string, std::vector<std::uint32_t>> name_postings_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> synonym_postings_;
};

/// Builds a store from vocabulary files and writes it to `store_path`.
IngestStats ingest_vocabulary(const VocabularyFiles& files,
                              const std::filesystem::path& store_path);

}  // namespace termmap
