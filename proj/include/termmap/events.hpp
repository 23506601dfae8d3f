#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "termmap/concept_store.hpp"
#include "termmap/llm_gateway.hpp"

namespace termmap {

using Json = nlohmann::ordered_json;

/// One entry of an omop_output CONCEPT array.
struct OmopConcept {
  std::string concept_name;
  ConceptId concept_id = 0;
  std::string vocabulary_id;
  std::string concept_code;
  double concept_name_similarity_score = 0.0;
  std::vector<std::string> synonyms;
  std::vector<AncestorLink> ancestors;
  std::vector<RelationshipLink> relationships;

  bool operator==(const OmopConcept&) const = default;
};

struct LlmOutput {
  std::string reply;
  std::string informal_name;
  std::string raw_text;
  ReplyMeta meta;

  bool operator==(const LlmOutput&) const = default;
};

struct OmopOutput {
  std::string search_term;
  std::vector<OmopConcept> concepts;
  /// Set when the search term had no usable words ("empty_query").
  std::optional<std::string> warning;

  bool operator==(const OmopOutput&) const = default;
};

struct VectorHitEntry {
  ConceptId concept_id = 0;
  std::string concept_name;
  double score = 0.0;
  std::optional<std::string> vocabulary_id;
  std::optional<std::string> concept_code;

  bool operator==(const VectorHitEntry&) const = default;
};

struct VectorOutput {
  std::string search_term;
  std::vector<VectorHitEntry> hits;

  bool operator==(const VectorOutput&) const = default;
};

struct ErrorEvent {
  std::string error;  // ErrorCode name
  std::string detail;

  bool operator==(const ErrorEvent&) const = default;
};

using MappingEvent = std::variant<LlmOutput, OmopOutput, VectorOutput, ErrorEvent>;

/// "llm_output", "omop_output", "vector_output" or "error".
std::string_view event_name(const MappingEvent& event) noexcept;

/// {"event": <name>, "payload": {...}} with payload keys in output order.
Json to_json(const MappingEvent& event);
Json payload_json(const MappingEvent& event);

/// Inverse of to_json(). Throws FormatError for unknown events or missing
/// keys.
MappingEvent event_from_json(const Json& j);

/// Concept record with CONCEPT_SYNONYM / CONCEPT_ANCESTOR /
/// CONCEPT_RELATIONSHIP arrays, as served by the concept lookup endpoint.
Json to_json(const ConceptDetails& details);

/// Parses a bare llm_output / omop_output payload.
LlmOutput llm_output_from_json(const Json& payload);
OmopOutput omop_output_from_json(const Json& payload);

}  // namespace termmap
