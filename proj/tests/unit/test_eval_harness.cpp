#include <doctest.h>

#include <random>

#include "termmap/error.hpp"
#include "termmap/eval_harness.hpp"

using namespace termmap;
using namespace termmap::eval;

namespace {

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

AnnotatedExample example(std::string name, ConceptId best, std::set<ConceptId> acceptable) {
  return {std::move(name), best, std::move(acceptable), true};
}

// 20 records with hand-counted outcomes:
//   3 not parsable, 4 exact match,
//   in vector top-k: 5 correct, 3 incorrect (2 of them relevant),
//   not in vector:   2 correct, 3 incorrect (1 relevant).
std::vector<AssessmentRecord> hand_counted() {
  std::vector<AssessmentRecord> out;
  const VectorHit unrelated{5, "unrelated", 0.2};
  for (int i = 0; i < 3; ++i) {
    AnnotatedExample e{"junk" + std::to_string(i), std::nullopt, {}, false};
    out.push_back(classify(e, {unrelated}, 5));
  }
  for (int i = 0; i < 4; ++i) {
    const ConceptId id = 100 + i;
    const auto name = "drug" + std::to_string(i);
    out.push_back(classify(example(name, id, {id}), {{id, "DRUG" + std::to_string(i), 1.0}},
                           std::nullopt));
  }
  for (int i = 0; i < 8; ++i) {
    const ConceptId best = 200 + i;
    const ConceptId other = 300 + i;
    const auto e = example("in" + std::to_string(i), best, {best, other});
    std::optional<ConceptId> llm = best;
    if (i >= 5) llm = i < 7 ? std::optional<ConceptId>(other) : std::optional<ConceptId>(999);
    out.push_back(classify(e, {unrelated, {best, "something else", 0.8}}, llm));
  }
  for (int i = 0; i < 5; ++i) {
    const ConceptId best = 400 + i;
    const ConceptId other = 500 + i;
    const auto e = example("out" + std::to_string(i), best, {best, other});
    std::optional<ConceptId> llm = best;
    if (i == 2) llm = other;
    if (i == 3) llm = 999;
    if (i == 4) llm = std::nullopt;
    out.push_back(classify(e, {unrelated}, llm));
  }
  return out;
}

}  // namespace

TEST_CASE("contingency: hand-counted fixture") {
  const auto r = summarize(hand_counted());
  CHECK(r.total == 20);
  CHECK(r.not_parsable == 3);
  CHECK(r.exact_match == 4);
  CHECK(r.in_vector.correct == 5);
  CHECK(r.in_vector.incorrect == 3);
  CHECK(r.in_vector.incorrect_but_relevant == 2);
  CHECK(r.not_in_vector.correct == 2);
  CHECK(r.not_in_vector.incorrect == 3);
  CHECK(r.not_in_vector.incorrect_but_relevant == 1);
  CHECK(r.totals().correct == 7);
  CHECK(r.totals().incorrect == 6);
  CHECK(r.additive());

  const auto j = to_json(r);
  CHECK(j["total"] == 20);
  CHECK(j["totals"]["total"] == 13);
  CHECK(j["additive"] == true);
  const auto table = format_table(r);
  CHECK(table.find("Not parsable") != std::string::npos);
  CHECK(table.find("Answer not in vector search") != std::string::npos);
}

TEST_CASE("classify: exact match ignores case and outer whitespace") {
  const auto e = example(" Aspirin ", 1, {1, 2});
  CHECK(classify(e, {{1, "aspirin", 1.0}}, std::nullopt).exact_match);
  CHECK_FALSE(classify(e, {{3, "aspirin", 1.0}}, std::nullopt).exact_match);
  CHECK(classify(e, {}, 2, std::string("ASPIRIN")).exact_match);
  const NameLookup lookup = [](ConceptId id) -> std::optional<std::string> {
    if (id == 2) return "aspirin";
    return std::nullopt;
  };
  CHECK(classify(e, {}, std::nullopt, std::nullopt, lookup).exact_match);
  CHECK(error_of([&] {
          classify(e, std::vector<VectorHit>(6, VectorHit{9, "x", 0.1}), std::nullopt);
        }) == ErrorCode::ValidationError);
}

TEST_CASE("validate") {
  CHECK_NOTHROW(validate(example("a", 1, {1})));
  CHECK(error_of([] { validate(example("a", 1, {2})); }) == ErrorCode::ValidationError);
  CHECK(error_of([] { validate({"a", 1, {}, false}); }) == ErrorCode::ValidationError);
  CHECK(error_of([] { validate({" ", std::nullopt, {}, true}); }) == ErrorCode::ValidationError);
  CHECK_NOTHROW(validate({"a", std::nullopt, {3}, true}));
}

TEST_CASE("parse_annotations") {
  const auto t = csv::parse(
      "informal_name,best_concept_id,acceptable_concept_ids,parsable\n"
      "Betnovate Scalp Application,920458,920458;920827,true\n"
      "zzz,,,no\n");
  const auto a = parse_annotations(t);
  REQUIRE(a.size() == 2);
  CHECK(a[0].best_concept_id == 920458);
  CHECK(a[0].acceptable_concept_ids == std::set<ConceptId>{920458, 920827});
  CHECK_FALSE(a[1].parsable);

  for (const char* bad : {"informal_name,best_concept_id,parsable\nx,1,true\n",
                          "informal_name,best_concept_id,acceptable_concept_ids,parsable\nx,1,2,true\n",
                          "informal_name,best_concept_id,acceptable_concept_ids,parsable\nx,abc,,true\n",
                          "informal_name,best_concept_id,acceptable_concept_ids,parsable\nx,,,maybe\n",
                          "informal_name,best_concept_id,acceptable_concept_ids,parsable\nx,,,1\nx,,,1\n"}) {
    CAPTURE(bad);
    CHECK(error_of([&] { parse_annotations(csv::parse(bad)); }) == ErrorCode::ValidationError);
  }
}

TEST_CASE("top5 comparison") {
  const std::vector<AnnotatedExample> ann{example("a", 1, {1, 2}), example("b", 3, {3}),
                                          {"c", std::nullopt, {}, false}};
  const auto results = parse_method_results(csv::parse(
      "informal_name,method,concept_ids\n"
      "a,rag,2;1\n"
      "b,rag,9\n"
      "a,fuzzy,7;7;7;7;7;1\n"
      "b,fuzzy,3\n"
      "c,fuzzy,\n"));
  const auto rows = top5_comparison(ann, results);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == "rag");
  CHECK(rows[0].correct_in_top5 == 1);
  CHECK(rows[0].relevant_in_top5 == 1);
  CHECK(rows[0].evaluated == 2);
  CHECK(rows[1].method == "fuzzy");
  CHECK(rows[1].correct_in_top5 == 1);
  CHECK(rows[1].relevant_in_top5 == 1);
  CHECK(rows[1].evaluated == 3);
  CHECK(top5_comparison(ann, results, 6)[1].correct_in_top5 == 2);
  CHECK(format_table(rows).find("fuzzy") != std::string::npos);

  CHECK(error_of([&] {
          top5_comparison(ann, {{"rag", "unknown", {1}}});
        }) == ErrorCode::ValidationError);
  CHECK(error_of([] {
          parse_method_results(csv::parse("informal_name,concept_ids\na,1\n"));
        }) == ErrorCode::ValidationError);
}

TEST_CASE("collect_observations and evaluate") {
  const auto results = Json::parse(R"([
    {"name":"Betnovate Scalp Application","events":[
      {"event":"llm_output","payload":{"reply":"Betamethasone","informal_name":"Betnovate Scalp Application","meta":[
        {"id":"cmpl-1","object":"text_completion","created":0,"model":"stub",
         "choices":[{"text":"Betamethasone","index":0,"logprobs":null,"finish_reason":"stop"}],
         "usage":{"prompt_tokens":1,"completion_tokens":1,"total_tokens":2}}]}},
      {"event":"omop_output","payload":{"search_term":"Betamethasone","CONCEPT":[
        {"concept_name":"betamethasone","concept_id":920458,"vocabulary_id":"RxNorm","concept_code":"1514",
         "concept_name_similarity_score":100.0,"CONCEPT_SYNONYM":[],"CONCEPT_ANCESTOR":[],"CONCEPT_RELATIONSHIP":[]}]}}]},
    {"name":"betamethasone","events":[
      {"event":"vector_output","payload":{"search_term":"betamethasone","hits":[
        {"concept_id":920458,"concept_name":"betamethasone","score":1.0}]}}]}
  ])");
  std::map<std::string, Observation> obs;
  collect_observations(results, obs);
  REQUIRE(obs.size() == 2);
  CHECK(obs["Betnovate Scalp Application"].llm_concept_id == 920458);
  CHECK(obs["betamethasone"].hits.size() == 1);

  const std::vector<AnnotatedExample> ann{
      example("Betnovate Scalp Application", 920458, {920458, 920827}),
      example("betamethasone", 920458, {920458})};
  const auto report = evaluate(ann, obs);
  CHECK(report.contingency.exact_match == 1);
  CHECK(report.contingency.not_in_vector.correct == 1);
  CHECK(report.contingency.additive());
  REQUIRE(report.top5.size() == 1);
  CHECK(report.top5[0].method == "vector_search");
  CHECK(to_json(report)["records"].size() == 2);

  auto more = ann;
  more.push_back(example("never ran", 1, {1}));
  CHECK(error_of([&] { evaluate(more, obs); }) == ErrorCode::ValidationError);
  CHECK(error_of([] {
          std::map<std::string, Observation> o;
          collect_observations(Json::object(), o);
        }) == ErrorCode::ValidationError);
}

TEST_CASE("property: random records stay additive and relevant covers correct") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(0, 9);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<AssessmentRecord> records;
    std::vector<AnnotatedExample> ann;
    std::vector<MethodResult> methods;
    for (int i = 0; i < 40; ++i) {
      const ConceptId best = 1 + pick(rng);
      const auto name = "n" + std::to_string(i);
      AnnotatedExample e = pick(rng) == 0 ? AnnotatedExample{name, std::nullopt, {}, false}
                                          : example(name, best, {best, best + 10});
      std::vector<VectorHit> hits;
      for (int h = 0; h < pick(rng) % 6; ++h) {
        const ConceptId id = 1 + pick(rng) * 2;
        hits.push_back({id, pick(rng) == 0 ? name : "x", 0.5});
      }
      std::optional<ConceptId> llm;
      if (pick(rng) > 1) llm = 1 + pick(rng) + (pick(rng) % 2) * 10;
      records.push_back(classify(e, hits, llm));
      MethodResult m{"m", name, {}};
      for (const auto& h : hits) m.ranked.push_back(h.concept_id);
      methods.push_back(std::move(m));
      ann.push_back(std::move(e));
    }
    const auto r = summarize(records);
    CHECK(r.additive());
    CHECK(r.total == records.size());
    for (std::size_t k = 1; k <= 5; ++k) {
      const auto rows = top5_comparison(ann, methods, k);
      REQUIRE(rows.size() == 1);
      CHECK(rows[0].relevant_in_top5 >= rows[0].correct_in_top5);
      if (k > 1) {
        const auto prev = top5_comparison(ann, methods, k - 1);
        CHECK(rows[0].correct_in_top5 >= prev[0].correct_in_top5);
        CHECK(rows[0].relevant_in_top5 >= prev[0].relevant_in_top5);
      }
    }
  }
}
