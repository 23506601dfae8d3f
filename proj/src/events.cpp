#include "termmap/events.hpp"

#include "termmap/error.hpp"

namespace termmap {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Json llm_payload(const LlmOutput& e) {
  Json choice;
  choice["text"] = e.raw_text;
  choice["index"] = 0;
  choice["logprobs"] = nullptr;
  choice["finish_reason"] = e.meta.finish_reason;

  Json usage;
  usage["prompt_tokens"] = e.meta.prompt_tokens;
  usage["completion_tokens"] = e.meta.completion_tokens;
  usage["total_tokens"] = e.meta.total_tokens;

  Json meta;
  meta["id"] = e.meta.id;
  meta["object"] = e.meta.object;
  meta["created"] = e.meta.created;
  meta["model"] = e.meta.model;
  meta["choices"] = Json::array({choice});
  meta["usage"] = usage;
  if (!e.meta.usage_reported) meta["usage_reported"] = false;

  Json j;
  j["reply"] = e.reply;
  j["informal_name"] = e.informal_name;
  j["meta"] = Json::array({meta});
  return j;
}

Json omop_concept_json(const OmopConcept& c) {
  Json j;
  j["concept_name"] = c.concept_name;
  j["concept_id"] = c.concept_id;
  j["vocabulary_id"] = c.vocabulary_id;
  j["concept_code"] = c.concept_code;
  j["concept_name_similarity_score"] = c.concept_name_similarity_score;
  Json synonyms = Json::array();
  for (const auto& s : c.synonyms) synonyms.push_back({{"concept_synonym_name", s}});
  Json ancestors = Json::array();
  for (const auto& a : c.ancestors) {
    ancestors.push_back({{"ancestor_concept_id", a.ancestor_concept_id},
                         {"min_levels_of_separation", a.levels_of_separation}});
  }
  Json relationships = Json::array();
  for (const auto& r : c.relationships) {
    relationships.push_back(
        {{"relationship_id", r.relationship_id}, {"concept_id_2", r.concept_id_2}});
  }
  j["CONCEPT_SYNONYM"] = std::move(synonyms);
  j["CONCEPT_ANCESTOR"] = std::move(ancestors);
  j["CONCEPT_RELATIONSHIP"] = std::move(relationships);
  return j;
}

Json omop_payload(const OmopOutput& e) {
  Json j;
  j["search_term"] = e.search_term;
  Json concepts = Json::array();
  for (const auto& c : e.concepts) concepts.push_back(omop_concept_json(c));
  j["CONCEPT"] = std::move(concepts);
  if (e.warning) j["warning"] = *e.warning;
  return j;
}

Json vector_payload(const VectorOutput& e) {
  Json j;
  j["search_term"] = e.search_term;
  Json hits = Json::array();
  for (const auto& h : e.hits) {
    Json hit;
    hit["concept_id"] = h.concept_id;
    hit["concept_name"] = h.concept_name;
    if (h.vocabulary_id) hit["vocabulary_id"] = *h.vocabulary_id;
    if (h.concept_code) hit["concept_code"] = *h.concept_code;
    hit["score"] = h.score;
    hits.push_back(std::move(hit));
  }
  j["hits"] = std::move(hits);
  return j;
}

[[noreturn]] void bad_event(const std::string& why) {
  throw Error(ErrorCode::FormatError, "malformed event JSON: " + why);
}

}  // namespace

std::string_view event_name(const MappingEvent& event) noexcept {
  return std::visit(Overloaded{
                        [](const LlmOutput&) { return std::string_view("llm_output"); },
                        [](const OmopOutput&) { return std::string_view("omop_output"); },
                        [](const VectorOutput&) { return std::string_view("vector_output"); },
                        [](const ErrorEvent&) { return std::string_view("error"); },
                    },
                    event);
}

Json payload_json(const MappingEvent& event) {
  return std::visit(Overloaded{
                        [](const LlmOutput& e) { return llm_payload(e); },
                        [](const OmopOutput& e) { return omop_payload(e); },
                        [](const VectorOutput& e) { return vector_payload(e); },
                        [](const ErrorEvent& e) {
                          return Json{{"error", e.error}, {"detail", e.detail}};
                        },
                    },
                    event);
}

Json to_json(const ConceptDetails& d) {
  OmopConcept oc;
  oc.synonyms = d.synonyms;
  oc.ancestors = d.ancestors;
  oc.relationships = d.relationships;
  const auto arrays = omop_concept_json(oc);

  Json j;
  j["concept_id"] = d.entry.concept_id;
  j["concept_name"] = d.entry.concept_name;
  j["vocabulary_id"] = d.entry.vocabulary_id;
  j["concept_code"] = d.entry.concept_code;
  j["domain_id"] = d.entry.domain_id;
  j["standard_concept"] = d.entry.standard_concept
                              ? Json(std::string(1, *d.entry.standard_concept))
                              : Json(nullptr);
  j["CONCEPT_SYNONYM"] = arrays["CONCEPT_SYNONYM"];
  j["CONCEPT_ANCESTOR"] = arrays["CONCEPT_ANCESTOR"];
  j["CONCEPT_RELATIONSHIP"] = arrays["CONCEPT_RELATIONSHIP"];
  return j;
}

Json to_json(const MappingEvent& event) {
  Json j;
  j["event"] = event_name(event);
  j["payload"] = payload_json(event);
  return j;
}

LlmOutput llm_output_from_json(const Json& p) {
  try {
    LlmOutput e;
    e.reply = p.at("reply").get<std::string>();
    e.informal_name = p.at("informal_name").get<std::string>();
    const auto& meta = p.at("meta").at(0);
    e.meta.id = meta.at("id").get<std::string>();
    e.meta.object = meta.at("object").get<std::string>();
    e.meta.created = meta.at("created").get<std::int64_t>();
    e.meta.model = meta.at("model").get<std::string>();
    const auto& choice = meta.at("choices").at(0);
    e.raw_text = choice.at("text").get<std::string>();
    if (const auto& fr = choice.at("finish_reason"); fr.is_string()) {
      e.meta.finish_reason = fr.get<std::string>();
    }
    const auto& usage = meta.at("usage");
    e.meta.prompt_tokens = usage.at("prompt_tokens").get<int>();
    e.meta.completion_tokens = usage.at("completion_tokens").get<int>();
    e.meta.total_tokens = usage.at("total_tokens").get<int>();
    e.meta.usage_reported = meta.value("usage_reported", true);
    return e;
  } catch (const Json::exception& ex) {
    bad_event(ex.what());
  }
}

OmopOutput omop_output_from_json(const Json& p) {
  try {
    OmopOutput e;
    e.search_term = p.at("search_term").get<std::string>();
    for (const auto& c : p.at("CONCEPT")) {
      OmopConcept oc;
      oc.concept_name = c.at("concept_name").get<std::string>();
      oc.concept_id = c.at("concept_id").get<ConceptId>();
      oc.vocabulary_id = c.at("vocabulary_id").get<std::string>();
      oc.concept_code = c.at("concept_code").get<std::string>();
      oc.concept_name_similarity_score =
          c.at("concept_name_similarity_score").get<double>();
      for (const auto& s : c.at("CONCEPT_SYNONYM")) {
        oc.synonyms.push_back(s.at("concept_synonym_name").get<std::string>());
      }
      for (const auto& a : c.at("CONCEPT_ANCESTOR")) {
        oc.ancestors.push_back({a.at("ancestor_concept_id").get<ConceptId>(),
                                a.at("min_levels_of_separation").get<int>()});
      }
      for (const auto& r : c.at("CONCEPT_RELATIONSHIP")) {
        oc.relationships.push_back({r.at("relationship_id").get<std::string>(),
                                    r.at("concept_id_2").get<ConceptId>()});
      }
      e.concepts.push_back(std::move(oc));
    }
    if (auto it = p.find("warning"); it != p.end()) e.warning = it->get<std::string>();
    return e;
  } catch (const Json::exception& ex) {
    bad_event(ex.what());
  }
}

MappingEvent event_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("event") || !j.contains("payload")) {
    bad_event("expected {\"event\", \"payload\"}");
  }
  const auto name = j["event"].get<std::string>();
  const auto& p = j["payload"];
  if (name == "llm_output") return llm_output_from_json(p);
  if (name == "omop_output") return omop_output_from_json(p);
  try {
    if (name == "vector_output") {
      VectorOutput e;
      e.search_term = p.at("search_term").get<std::string>();
      for (const auto& h : p.at("hits")) {
        VectorHitEntry entry;
        entry.concept_id = h.at("concept_id").get<ConceptId>();
        entry.concept_name = h.at("concept_name").get<std::string>();
        entry.score = h.at("score").get<double>();
        if (h.contains("vocabulary_id")) entry.vocabulary_id = h["vocabulary_id"].get<std::string>();
        if (h.contains("concept_code")) entry.concept_code = h["concept_code"].get<std::string>();
        e.hits.push_back(std::move(entry));
      }
      return e;
    }
    if (name == "error") {
      return ErrorEvent{p.at("error").get<std::string>(), p.at("detail").get<std::string>()};
    }
  } catch (const Json::exception& ex) {
    bad_event(ex.what());
  }
  bad_event("unknown event \"" + name + "\"");
}

}  // namespace termmap
