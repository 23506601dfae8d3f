#include "termmap/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "termmap/error.hpp"
#include "termmap/fuzzy.hpp"

namespace termmap {

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::ValidationError, what);
}

template <typename T>
T get_as(const Json& j, std::string_view key) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    invalid("pipeline_options." + std::string(key) + " has the wrong type");
  }
}

bool get_bool(const Json& j, std::string_view key) {
  if (!j.is_boolean()) invalid("pipeline_options." + std::string(key) + " must be a boolean");
  return j.get<bool>();
}

double get_number(const Json& j, std::string_view key) {
  if (!j.is_number()) invalid("pipeline_options." + std::string(key) + " must be a number");
  return j.get<double>();
}

std::size_t get_positive(const Json& j, std::string_view key) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 1) {
    invalid("pipeline_options." + std::string(key) + " must be an integer >= 1");
  }
  return static_cast<std::size_t>(j.get<std::int64_t>());
}

ErrorEvent to_event(const Error& e) {
  return {std::string(to_string(e.code())), e.what()};
}

template <typename Body>
std::vector<MappingEvent> collect(Body&& body) {
  std::vector<MappingEvent> events;
  try {
    body(events);
  } catch (const Error& e) {
    events.emplace_back(to_event(e));
  }
  return events;
}

void require_name(std::string_view name) {
  if (trim(name).empty()) {
    throw Error(ErrorCode::InvalidInput, "informal name must not be empty");
  }
}

}  // namespace

std::string_view to_string(PipelineMode mode) noexcept {
  switch (mode) {
    case PipelineMode::VectorSearch: return "vector_search";
    case PipelineMode::Llm: return "llm";
    case PipelineMode::Rag: return "rag";
    case PipelineMode::DbSearch: return "db_search";
  }
  return "rag";
}

std::optional<PipelineMode> parse_mode(std::string_view name) noexcept {
  if (name == "vector_search") return PipelineMode::VectorSearch;
  if (name == "llm") return PipelineMode::Llm;
  if (name == "rag") return PipelineMode::Rag;
  if (name == "db_search") return PipelineMode::DbSearch;
  return std::nullopt;
}

PipelineOptions parse_pipeline_options(const Json& j, const PipelineOptions& base) {
  PipelineOptions o = base;
  if (j.is_null()) return o;
  if (!j.is_object()) invalid("pipeline_options must be an object");

  for (const auto& [key, value] : j.items()) {
    if (key == "mode") {
      if (!value.is_string()) invalid("pipeline_options.mode must be a string");
      auto mode = parse_mode(value.get<std::string>());
      if (!mode) {
        invalid("pipeline_options.mode must be one of vector_search, llm, rag, "
                "db_search");
      }
      o.mode = *mode;
    } else if (key == "k") {
      o.k = get_positive(value, key);
    } else if (key == "exact_match_threshold") {
      const double t = get_number(value, key);
      if (!(t > 0.0 && t <= 1.0)) invalid("pipeline_options.exact_match_threshold must be in (0, 1]");
      o.exact_match_threshold = t;
    } else if (key == "similarity_threshold") {
      const double t = get_number(value, key);
      if (!(t >= 0.0 && t <= 100.0)) invalid("pipeline_options.similarity_threshold must be in [0, 100]");
      o.similarity_threshold = t;
    } else if (key == "vocabulary_filter") {
      if (value.is_null()) {
        o.vocabulary_filter.reset();
      } else {
        if (!value.is_array()) invalid("pipeline_options.vocabulary_filter must be an array or null");
        o.vocabulary_filter = get_as<std::vector<std::string>>(value, key);
      }
    } else if (key == "include_synonyms") {
      o.include_synonyms = get_bool(value, key);
    } else if (key == "fetch_details") {
      if (!value.is_object()) invalid("pipeline_options.fetch_details must be an object");
      for (const auto& [flag, v] : value.items()) {
        const auto path = "fetch_details." + flag;
        if (flag == "synonyms") o.fetch_details.synonyms = get_bool(v, path);
        else if (flag == "ancestors") o.fetch_details.ancestors = get_bool(v, path);
        else if (flag == "relationships") o.fetch_details.relationships = get_bool(v, path);
        else invalid("unknown pipeline option " + path);
      }
    } else if (key == "generation") {
      if (!value.is_object()) invalid("pipeline_options.generation must be an object");
      for (const auto& [param, v] : value.items()) {
        const auto path = "generation." + param;
        if (param == "max_tokens") {
          o.generation.max_tokens = static_cast<int>(get_positive(v, path));
        } else if (param == "temperature") {
          const double t = get_number(v, path);
          if (t < 0.0) invalid("pipeline_options.generation.temperature must be >= 0");
          o.generation.temperature = t;
        } else if (param == "stop") {
          if (!v.is_array()) invalid("pipeline_options.generation.stop must be an array");
          o.generation.stop = get_as<std::vector<std::string>>(v, path);
        } else {
          invalid("unknown pipeline option " + path);
        }
      }
    } else if (key == "search_limit") {
      o.search_limit = get_positive(value, key);
    } else if (key == "report_timing") {
      o.report_timing = get_bool(value, key);
    } else {
      invalid("unknown pipeline option " + key);
    }
  }
  return o;
}

Json to_json(const PipelineOptions& o) {
  Json j;
  j["mode"] = to_string(o.mode);
  j["k"] = o.k;
  j["exact_match_threshold"] = o.exact_match_threshold;
  j["similarity_threshold"] = o.similarity_threshold;
  j["vocabulary_filter"] = o.vocabulary_filter ? Json(*o.vocabulary_filter) : Json(nullptr);
  j["include_synonyms"] = o.include_synonyms;
  j["fetch_details"] = {{"synonyms", o.fetch_details.synonyms},
                        {"ancestors", o.fetch_details.ancestors},
                        {"relationships", o.fetch_details.relationships}};
  j["generation"] = {{"max_tokens", o.generation.max_tokens},
                     {"temperature", o.generation.temperature},
                     {"stop", o.generation.stop}};
  j["search_limit"] = o.search_limit;
  j["report_timing"] = o.report_timing;
  return j;
}

Json to_json(const NameResult& result, bool include_timing) {
  Json j;
  j["name"] = result.name;
  Json events = Json::array();
  for (const auto& e : result.events) events.push_back(to_json(e));
  j["events"] = std::move(events);
  if (include_timing) j["elapsed_ms"] = result.elapsed.count();
  return j;
}

void Pipeline::require_ready(PipelineMode mode) const {
  const bool needs_store = mode != PipelineMode::VectorSearch;
  const bool needs_index = mode == PipelineMode::VectorSearch || mode == PipelineMode::Rag;
  const bool needs_backend = mode == PipelineMode::Llm || mode == PipelineMode::Rag;
  if (needs_store && (!deps_.store || !deps_.store->loaded())) {
    throw Error(ErrorCode::StoreUnavailable, "concept store is not loaded");
  }
  if (needs_index && (!deps_.index || !deps_.index->loaded())) {
    throw Error(ErrorCode::StoreUnavailable, "vector index is not loaded");
  }
  if (needs_index && !deps_.embedder) {
    throw Error(ErrorCode::StoreUnavailable, "no embedding provider configured");
  }
  if (needs_backend && !deps_.backend) {
    throw Error(ErrorCode::BackendUnavailable, "no generation backend configured");
  }
}

OmopOutput Pipeline::omop_query(std::string_view search_term,
                                const PipelineOptions& options) const {
  OmopOutput out;
  out.search_term = std::string(search_term);
  SearchQuery query;
  try {
    query = preprocess_search_term(search_term);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyQuery) throw;
    out.warning = std::string(to_string(ErrorCode::EmptyQuery));
    return out;
  }
  query.vocabulary_filter = options.vocabulary_filter;
  query.include_synonyms = options.include_synonyms;

  const auto& store = *deps_.store;
  const auto candidates = store.text_search(query, options.search_limit);

  std::vector<ScoredConcept> ranked;
  if (options.include_synonyms) {
    // Score against the best of the primary name and its synonyms.
    for (const auto& c : candidates) {
      double score = indel_similarity(search_term, c.concept_name);
      for (const auto& syn : store.synonyms_of(c.concept_id)) {
        score = std::max(score, indel_similarity(search_term, syn));
      }
      if (score >= options.similarity_threshold) ranked.push_back({c, score});
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return a.entry.concept_id < b.entry.concept_id;
    });
  } else {
    ranked = rank_candidates(search_term, candidates, options.similarity_threshold);
  }

  for (auto& r : ranked) {
    OmopConcept oc;
    oc.concept_name = std::move(r.entry.concept_name);
    oc.concept_id = r.entry.concept_id;
    oc.vocabulary_id = std::move(r.entry.vocabulary_id);
    oc.concept_code = std::move(r.entry.concept_code);
    oc.concept_name_similarity_score = r.similarity;
    if (options.fetch_details.any()) {
      auto details = store.fetch_concept_details(oc.concept_id, options.fetch_details);
      oc.synonyms = std::move(details.synonyms);
      oc.ancestors = std::move(details.ancestors);
      oc.relationships = std::move(details.relationships);
    }
    out.concepts.push_back(std::move(oc));
  }
  return out;
}

VectorOutput Pipeline::vector_output(std::string_view name,
                                     const std::vector<VectorHit>& hits) const {
  VectorOutput out;
  out.search_term = std::string(name);
  for (const auto& h : hits) {
    VectorHitEntry entry{h.concept_id, h.concept_name, h.score, std::nullopt, std::nullopt};
    if (deps_.store && deps_.store->loaded()) {
      if (const auto* c = deps_.store->find(h.concept_id)) {
        entry.vocabulary_id = c->vocabulary_id;
        entry.concept_code = c->concept_code;
      }
    }
    out.hits.push_back(std::move(entry));
  }
  return out;
}

std::vector<VectorHit> Pipeline::vector_hits(std::string_view name,
                                             const PipelineOptions& options) const {
  return deps_.index->query_top_k(name, options.k, *deps_.embedder);
}

std::vector<MappingEvent> Pipeline::run_rag(std::string_view name,
                                            const PipelineOptions& options) const {
  require_ready(PipelineMode::Rag);
  return collect([&](std::vector<MappingEvent>& events) {
    require_name(name);
    const auto hits = vector_hits(name, options);
    const auto exact = exceeds_exact_threshold(hits, options.exact_match_threshold);
    if (!exact.empty()) {
      events.emplace_back(vector_output(name, exact));
      return;
    }
    const auto prompt = build_rag_prompt(name, hits);
    // Keep the llm_output if the store lookup fails afterwards.
    auto reply = generate(prompt, *deps_.backend, options.generation);
    LlmOutput llm{reply.reply, std::string(name), std::move(reply.raw_text),
                  std::move(reply.meta)};
    events.emplace_back(std::move(llm));
    events.emplace_back(omop_query(reply.reply, options));
  });
}

std::vector<MappingEvent> Pipeline::run_llm(std::string_view name,
                                            const PipelineOptions& options) const {
  require_ready(PipelineMode::Llm);
  return collect([&](std::vector<MappingEvent>& events) {
    require_name(name);
    auto reply = generate(build_simple_prompt(name), *deps_.backend, options.generation);
    LlmOutput llm{reply.reply, std::string(name), std::move(reply.raw_text),
                  std::move(reply.meta)};
    events.emplace_back(std::move(llm));
    events.emplace_back(omop_query(reply.reply, options));
  });
}

std::vector<MappingEvent> Pipeline::run_vector(std::string_view name,
                                               const PipelineOptions& options) const {
  require_ready(PipelineMode::VectorSearch);
  return collect([&](std::vector<MappingEvent>& events) {
    require_name(name);
    events.emplace_back(vector_output(name, vector_hits(name, options)));
  });
}

std::vector<MappingEvent> Pipeline::run_db(std::string_view name,
                                           const PipelineOptions& options) const {
  require_ready(PipelineMode::DbSearch);
  return collect([&](std::vector<MappingEvent>& events) {
    require_name(name);
    events.emplace_back(omop_query(name, options));
  });
}

std::vector<MappingEvent> Pipeline::run(std::string_view name,
                                        const PipelineOptions& options) const {
  switch (options.mode) {
    case PipelineMode::VectorSearch: return run_vector(name, options);
    case PipelineMode::Llm: return run_llm(name, options);
    case PipelineMode::Rag: return run_rag(name, options);
    case PipelineMode::DbSearch: return run_db(name, options);
  }
  return {};
}

std::vector<NameResult> Pipeline::run_batch(const std::vector<std::string>& names,
                                            const PipelineOptions& options,
                                            std::size_t workers) const {
  std::vector<NameResult> results(names.size());
  auto process = [&](std::size_t i) {
    auto& r = results[i];
    r.name = names[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      r.events = run(names[i], options);
    } catch (const Error& e) {
      r.events.emplace_back(to_event(e));
    } catch (const std::exception& e) {
      r.events.emplace_back(ErrorEvent{"internal_error", e.what()});
    }
    r.elapsed = std::chrono::steady_clock::now() - start;
  };

  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(names.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < names.size(); ++i) process(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (auto i = next++; i < names.size(); i = next++) process(i);
      });
    }
  }
  return results;
}

}  // namespace termmap
