#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "termmap/csv.hpp"
#include "termmap/events.hpp"
#include "termmap/vector_index.hpp"

namespace termmap::eval {

/// Human ground truth for one informal name.
struct AnnotatedExample {
  std::string informal_name;
  std::optional<ConceptId> best_concept_id;
  std::set<ConceptId> acceptable_concept_ids;
  bool parsable = true;
};

/// Throws ValidationError if the example breaks its invariants (unparsable
/// examples carry no concepts; the best concept is among the acceptable ones).
void validate(const AnnotatedExample& example);

/// Columns: informal_name, best_concept_id, acceptable_concept_ids
/// (semicolon-separated), parsable (true/false/1/0/yes/no).
std::vector<AnnotatedExample> parse_annotations(const csv::Table& table);

struct AssessmentRecord {
  std::string informal_name;
  /// Not parsable; left out of every correctness count.
  bool excluded = false;
  bool exact_match = false;
  bool answer_in_vector_topk = false;
  bool llm_correct = false;
  bool llm_relevant = false;
};

using NameLookup = std::function<std::optional<std::string>(ConceptId)>;

/// exact_match: the informal name equals (ignoring ASCII case and outer
/// whitespace) the name of an acceptable concept. Names come from the hits,
/// `llm_concept_name` and `lookup` when given.
/// Throws ValidationError if more than `k` hits are supplied.
AssessmentRecord classify(const AnnotatedExample& example,
                          const std::vector<VectorHit>& vector_hits,
                          std::optional<ConceptId> llm_concept_id,
                          std::optional<std::string> llm_concept_name = std::nullopt,
                          const NameLookup& lookup = {}, std::size_t k = 5);

struct OutcomeCell {
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  /// Incorrect answers that were still in the acceptable set.
  std::size_t incorrect_but_relevant = 0;

  std::size_t total() const noexcept { return correct + incorrect; }
};

/// Not parsable / exact match / {answer in, not in vector search} x
/// {correct, incorrect}.
struct ContingencyReport {
  std::size_t total = 0;
  std::size_t not_parsable = 0;
  std::size_t exact_match = 0;
  OutcomeCell in_vector;
  OutcomeCell not_in_vector;

  OutcomeCell totals() const noexcept;
  /// Every marginal equals the sum of its cells and the rows add up to total.
  bool additive() const noexcept;
};

ContingencyReport summarize(const std::vector<AssessmentRecord>& records);

Json to_json(const ContingencyReport& report);
std::string format_table(const ContingencyReport& report);

/// Ranked concept ids one method produced for one informal name.
struct MethodResult {
  std::string method;
  std::string informal_name;
  std::vector<ConceptId> ranked;
};

/// Columns: informal_name, method, concept_ids (semicolon-separated, best
/// first). Throws ValidationError when a column is missing.
std::vector<MethodResult> parse_method_results(const csv::Table& table);

struct TopKRow {
  std::string method;
  std::size_t correct_in_top5 = 0;
  std::size_t relevant_in_top5 = 0;
  std::size_t evaluated = 0;
};

/// One row per method in order of first appearance. Results for names that
/// have no annotation throw ValidationError.
std::vector<TopKRow> top5_comparison(const std::vector<AnnotatedExample>& annotations,
                                     const std::vector<MethodResult>& results,
                                     std::size_t k = 5);

std::string format_table(const std::vector<TopKRow>& rows);

/// What a pipeline run produced for one name, pulled from its events.
struct Observation {
  std::vector<VectorHit> hits;
  std::optional<ConceptId> llm_concept_id;
  std::optional<std::string> llm_concept_name;
};

/// Reads a batch result array ([{name, events}, ...]) and merges it into
/// `into`: vector hits come from vector_output events; the LLM answer is the
/// first CONCEPT of the omop_output that follows an llm_output.
void collect_observations(const Json& results, std::map<std::string, Observation>& into);

struct EvaluationReport {
  std::vector<AssessmentRecord> records;
  ContingencyReport contingency;
  std::vector<TopKRow> top5;
};

/// Throws ValidationError listing annotated names without observations.
EvaluationReport evaluate(const std::vector<AnnotatedExample>& annotations,
                          const std::map<std::string, Observation>& observations,
                          const std::vector<MethodResult>& extra_methods = {},
                          const NameLookup& lookup = {}, std::size_t k = 5);

Json to_json(const EvaluationReport& report);

}  // namespace termmap::eval
