#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "termmap/concept_store.hpp"
#include "termmap/embedding.hpp"
#include "termmap/events.hpp"
#include "termmap/llm_gateway.hpp"
#include "termmap/vector_index.hpp"

namespace termmap {

enum class PipelineMode { VectorSearch, Llm, Rag, DbSearch };

std::string_view to_string(PipelineMode mode) noexcept;
/// Accepts "vector_search", "llm", "rag", "db_search".
std::optional<PipelineMode> parse_mode(std::string_view name) noexcept;

struct PipelineOptions {
  PipelineMode mode = PipelineMode::Rag;
  std::size_t k = 5;
  double exact_match_threshold = 0.95;
  double similarity_threshold = 80.0;
  std::optional<std::vector<std::string>> vocabulary_filter =
      std::vector<std::string>{"RxNorm"};
  bool include_synonyms = false;
  DetailFlags fetch_details;
  GenerationParams generation;
  /// Cap on text-search candidates handed to fuzzy ranking.
  std::size_t search_limit = 1000;
  /// Adds per-name elapsed_ms to serialized batch results.
  bool report_timing = false;

  bool operator==(const PipelineOptions&) const = default;
};

/// Overlays `j` (a possibly partial options object) on `base`. Unknown keys
/// and out-of-range values throw ValidationError.
PipelineOptions parse_pipeline_options(const Json& j,
                                       const PipelineOptions& base = {});
Json to_json(const PipelineOptions& options);

/// Shared, read-only collaborators. Any of them may be absent; a pipeline
/// mode that needs a missing one throws StoreUnavailable before doing work.
struct PipelineDeps {
  const ConceptStore* store = nullptr;
  const VectorIndex* index = nullptr;
  const EmbeddingProvider* embedder = nullptr;
  GenerationBackend* backend = nullptr;
};

struct NameResult {
  std::string name;
  std::vector<MappingEvent> events;
  std::chrono::duration<double, std::milli> elapsed{0};
};

Json to_json(const NameResult& result, bool include_timing);

/// Runs the mapping flows. Module errors raised while processing a name are
/// turned into a trailing ErrorEvent so callers always get the events that
/// were produced before the failure.
class Pipeline {
 public:
  explicit Pipeline(PipelineDeps deps) : deps_(deps) {}

  /// Vector top-k; if any hit clears the exact-match threshold those hits
  /// are returned and generation is skipped, otherwise the hits go into a
  /// RAG prompt and the reply is looked up in the store.
  std::vector<MappingEvent> run_rag(std::string_view name,
                                    const PipelineOptions& options) const;
  std::vector<MappingEvent> run_llm(std::string_view name,
                                    const PipelineOptions& options) const;
  std::vector<MappingEvent> run_vector(std::string_view name,
                                       const PipelineOptions& options) const;
  std::vector<MappingEvent> run_db(std::string_view name,
                                   const PipelineOptions& options) const;

  /// Dispatches on options.mode.
  std::vector<MappingEvent> run(std::string_view name,
                                const PipelineOptions& options) const;

  /// Results in input order. `workers` > 1 processes names concurrently.
  std::vector<NameResult> run_batch(const std::vector<std::string>& names,
                                    const PipelineOptions& options,
                                    std::size_t workers = 1) const;

  /// Throws StoreUnavailable naming the first missing dependency for `mode`.
  void require_ready(PipelineMode mode) const;

  /// Store lookup for the reply / search term, as an omop_output event.
  OmopOutput omop_query(std::string_view search_term,
                        const PipelineOptions& options) const;

 private:
  VectorOutput vector_output(std::string_view name,
                             const std::vector<VectorHit>& hits) const;
  std::vector<VectorHit> vector_hits(std::string_view name,
                                     const PipelineOptions& options) const;

  PipelineDeps deps_;
};

}  // namespace termmap
