#include "termmap/eval_harness.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "termmap/error.hpp"
#include "termmap/text.hpp"

namespace termmap::eval {

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::ValidationError, what);
}

ConceptId parse_concept_id(std::string_view s, const std::string& where) {
  s = trim(s);
  ConceptId id = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
  if (ec != std::errc{} || ptr != s.data() + s.size() || id <= 0) {
    invalid("bad concept id '" + std::string(s) + "' in " + where);
  }
  return id;
}

std::vector<ConceptId> parse_id_list(std::string_view s, const std::string& where) {
  std::vector<ConceptId> ids;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(';', start);
    if (end == std::string_view::npos) end = s.size();
    const auto part = trim(s.substr(start, end - start));
    if (!part.empty()) ids.push_back(parse_concept_id(part, where));
    start = end + 1;
  }
  return ids;
}

bool parse_flag(std::string_view s, const std::string& where) {
  const auto v = to_lower_ascii(trim(s));
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  invalid("bad parsable flag '" + std::string(s) + "' in " + where);
}

std::size_t require_column(const csv::Table& table, std::string_view name) {
  auto col = table.column(name);
  if (!col) invalid("missing column '" + std::string(name) + "'");
  return *col;
}

const std::string& cell(const csv::Row& row, std::size_t col) {
  static const std::string empty;
  return col < row.size() ? row[col] : empty;
}

bool same_name(std::string_view a, std::string_view b) {
  return to_lower_ascii(trim(a)) == to_lower_ascii(trim(b));
}

std::string pad(std::string_view s, std::size_t width, bool right = false) {
  std::string out(s);
  if (out.size() >= width) return out;
  const std::string fill(width - out.size(), ' ');
  return right ? fill + out : out + fill;
}

}  // namespace

void validate(const AnnotatedExample& e) {
  if (trim(e.informal_name).empty()) invalid("annotation with empty informal_name");
  if (!e.parsable) {
    if (e.best_concept_id || !e.acceptable_concept_ids.empty()) {
      invalid("'" + e.informal_name + "' is not parsable but lists concepts");
    }
    return;
  }
  if (e.best_concept_id && !e.acceptable_concept_ids.contains(*e.best_concept_id)) {
    invalid("'" + e.informal_name + "': best_concept_id is not in acceptable_concept_ids");
  }
}

std::vector<AnnotatedExample> parse_annotations(const csv::Table& table) {
  const auto name_col = require_column(table, "informal_name");
  const auto best_col = require_column(table, "best_concept_id");
  const auto acc_col = require_column(table, "acceptable_concept_ids");
  const auto parsable_col = require_column(table, "parsable");

  std::vector<AnnotatedExample> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where = "annotation row " + std::to_string(r + 2);
    AnnotatedExample e;
    e.informal_name = std::string(trim(cell(row, name_col)));
    e.parsable = parse_flag(cell(row, parsable_col), where);
    if (!trim(cell(row, best_col)).empty()) {
      e.best_concept_id = parse_concept_id(cell(row, best_col), where);
    }
    for (auto id : parse_id_list(cell(row, acc_col), where)) {
      e.acceptable_concept_ids.insert(id);
    }
    validate(e);
    if (!seen.insert(e.informal_name).second) {
      invalid("duplicate informal_name '" + e.informal_name + "' in annotations");
    }
    out.push_back(std::move(e));
  }
  return out;
}

AssessmentRecord classify(const AnnotatedExample& example,
                          const std::vector<VectorHit>& vector_hits,
                          std::optional<ConceptId> llm_concept_id,
                          std::optional<std::string> llm_concept_name,
                          const NameLookup& lookup, std::size_t k) {
  if (vector_hits.size() > k) {
    invalid("classify got " + std::to_string(vector_hits.size()) +
            " vector hits, more than k = " + std::to_string(k));
  }
  AssessmentRecord rec;
  rec.informal_name = example.informal_name;
  if (!example.parsable) {
    rec.excluded = true;
    return rec;
  }
  const auto& acceptable = example.acceptable_concept_ids;

  auto matches_name = [&](ConceptId id, std::string_view name) {
    return acceptable.contains(id) && same_name(example.informal_name, name);
  };
  for (const auto& h : vector_hits) {
    if (acceptable.contains(h.concept_id)) rec.answer_in_vector_topk = true;
    if (matches_name(h.concept_id, h.concept_name)) rec.exact_match = true;
  }
  if (llm_concept_id && llm_concept_name &&
      matches_name(*llm_concept_id, *llm_concept_name)) {
    rec.exact_match = true;
  }
  if (!rec.exact_match && lookup) {
    for (auto id : acceptable) {
      if (auto name = lookup(id); name && same_name(example.informal_name, *name)) {
        rec.exact_match = true;
        break;
      }
    }
  }
  if (llm_concept_id) {
    rec.llm_correct = example.best_concept_id == llm_concept_id;
    rec.llm_relevant = acceptable.contains(*llm_concept_id);
  }
  return rec;
}

OutcomeCell ContingencyReport::totals() const noexcept {
  return {in_vector.correct + not_in_vector.correct,
          in_vector.incorrect + not_in_vector.incorrect,
          in_vector.incorrect_but_relevant + not_in_vector.incorrect_but_relevant};
}

bool ContingencyReport::additive() const noexcept {
  const auto t = totals();
  return t.total() == in_vector.total() + not_in_vector.total() &&
         t.correct == in_vector.correct + not_in_vector.correct &&
         t.incorrect == in_vector.incorrect + not_in_vector.incorrect &&
         in_vector.incorrect_but_relevant <= in_vector.incorrect &&
         not_in_vector.incorrect_but_relevant <= not_in_vector.incorrect &&
         total == not_parsable + exact_match + t.total();
}

ContingencyReport summarize(const std::vector<AssessmentRecord>& records) {
  ContingencyReport r;
  r.total = records.size();
  for (const auto& rec : records) {
    if (rec.excluded) {
      ++r.not_parsable;
    } else if (rec.exact_match) {
      ++r.exact_match;
    } else {
      auto& cell = rec.answer_in_vector_topk ? r.in_vector : r.not_in_vector;
      if (rec.llm_correct) {
        ++cell.correct;
      } else {
        ++cell.incorrect;
        if (rec.llm_relevant) ++cell.incorrect_but_relevant;
      }
    }
  }
  return r;
}

Json to_json(const ContingencyReport& r) {
  auto cell_json = [](const OutcomeCell& c) {
    return Json{{"correct", c.correct},
                {"incorrect", c.incorrect},
                {"incorrect_but_relevant", c.incorrect_but_relevant},
                {"total", c.total()}};
  };
  Json j;
  j["not_parsable"] = r.not_parsable;
  j["exact_match"] = r.exact_match;
  j["answer_in_vector_search"] = cell_json(r.in_vector);
  j["answer_not_in_vector_search"] = cell_json(r.not_in_vector);
  j["totals"] = cell_json(r.totals());
  j["total"] = r.total;
  j["additive"] = r.additive();
  j["exact_match_criterion"] = "acceptable_set";
  return j;
}

std::string format_table(const ContingencyReport& r) {
  constexpr std::size_t kLabel = 52;
  constexpr std::size_t kNum = 10;
  auto num = [](std::size_t v) { return pad(std::to_string(v), kNum, true); };
  const std::string blank(kNum, ' ');
  std::ostringstream out;
  out << pad("", kLabel) << pad("Correct", kNum, true) << pad("Incorrect", kNum, true)
      << pad("Total", kNum, true) << '\n';
  out << pad("Not parsable", kLabel) << blank << blank << num(r.not_parsable) << '\n';
  out << pad("Parsable   Exact match", kLabel) << blank << blank << num(r.exact_match) << '\n';
  out << pad("           Not exact   Answer in vector search", kLabel)
      << num(r.in_vector.correct) << num(r.in_vector.incorrect) << num(r.in_vector.total())
      << '\n';
  out << pad("                       Answer not in vector search", kLabel)
      << num(r.not_in_vector.correct) << num(r.not_in_vector.incorrect)
      << num(r.not_in_vector.total()) << '\n';
  const auto t = r.totals();
  out << pad("Total", kLabel) << num(t.correct) << num(t.incorrect) << num(r.total) << '\n';
  return out.str();
}

std::vector<MethodResult> parse_method_results(const csv::Table& table) {
  const auto name_col = require_column(table, "informal_name");
  const auto method_col = require_column(table, "method");
  const auto ids_col = require_column(table, "concept_ids");
  std::vector<MethodResult> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    MethodResult m;
    m.informal_name = std::string(trim(cell(row, name_col)));
    m.method = std::string(trim(cell(row, method_col)));
    if (m.method.empty()) invalid("empty method in row " + std::to_string(r + 2));
    m.ranked = parse_id_list(cell(row, ids_col), "method row " + std::to_string(r + 2));
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<TopKRow> top5_comparison(const std::vector<AnnotatedExample>& annotations,
                                     const std::vector<MethodResult>& results,
                                     std::size_t k) {
  std::map<std::string, const AnnotatedExample*> by_name;
  for (const auto& a : annotations) by_name[a.informal_name] = &a;

  std::vector<TopKRow> rows;
  for (const auto& res : results) {
    auto it = by_name.find(res.informal_name);
    if (it == by_name.end()) {
      invalid("method '" + res.method + "' has a result for unannotated name '" +
              res.informal_name + "'");
    }
    auto row = std::find_if(rows.begin(), rows.end(),
                            [&](const TopKRow& r) { return r.method == res.method; });
    if (row == rows.end()) {
      rows.push_back({res.method, 0, 0, 0});
      row = rows.end() - 1;
    }
    const auto& ex = *it->second;
    const auto n = std::min(k, res.ranked.size());
    bool correct = false;
    bool relevant = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (ex.best_concept_id == res.ranked[i]) correct = true;
      if (ex.acceptable_concept_ids.contains(res.ranked[i])) relevant = true;
    }
    ++row->evaluated;
    if (correct) ++row->correct_in_top5;
    if (relevant) ++row->relevant_in_top5;
  }
  return rows;
}

std::string format_table(const std::vector<TopKRow>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  std::ostringstream out;
  out << pad("Method", width + 2) << pad("Correct in top 5", 18, true)
      << pad("Relevant in top 5", 19, true) << pad("Evaluated", 11, true) << '\n';
  for (const auto& r : rows) {
    out << pad(r.method, width + 2) << pad(std::to_string(r.correct_in_top5), 18, true)
        << pad(std::to_string(r.relevant_in_top5), 19, true)
        << pad(std::to_string(r.evaluated), 11, true) << '\n';
  }
  return out.str();
}

void collect_observations(const Json& results, std::map<std::string, Observation>& into) {
  if (!results.is_array()) invalid("results file must hold a JSON array");
  for (const auto& entry : results) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("events")) {
      invalid("each result needs 'name' and 'events'");
    }
    auto& obs = into[entry["name"].get<std::string>()];
    bool after_llm = false;
    for (const auto& ej : entry["events"]) {
      const auto event = event_from_json(ej);
      if (const auto* v = std::get_if<VectorOutput>(&event)) {
        obs.hits.clear();
        for (const auto& h : v->hits) obs.hits.push_back({h.concept_id, h.concept_name, h.score});
      } else if (std::holds_alternative<LlmOutput>(event)) {
        after_llm = true;
      } else if (const auto* o = std::get_if<OmopOutput>(&event); o && after_llm) {
        if (!o->concepts.empty()) {
          obs.llm_concept_id = o->concepts.front().concept_id;
          obs.llm_concept_name = o->concepts.front().concept_name;
        }
        after_llm = false;
      }
    }
  }
}

EvaluationReport evaluate(const std::vector<AnnotatedExample>& annotations,
                          const std::map<std::string, Observation>& observations,
                          const std::vector<MethodResult>& extra_methods,
                          const NameLookup& lookup, std::size_t k) {
  std::vector<std::string> missing;
  for (const auto& a : annotations) {
    if (!observations.contains(a.informal_name)) missing.push_back(a.informal_name);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + ("'" + m + "'");
    invalid("no results for " + std::to_string(missing.size()) + " annotated name(s): " + list);
  }

  EvaluationReport report;
  std::vector<MethodResult> methods;
  bool any_hits = false;
  for (const auto& a : annotations) {
    const auto& obs = observations.at(a.informal_name);
    std::vector<VectorHit> hits(obs.hits.begin(),
                                obs.hits.begin() + std::min(k, obs.hits.size()));
    any_hits = any_hits || !hits.empty();
    report.records.push_back(
        classify(a, hits, obs.llm_concept_id, obs.llm_concept_name, lookup, k));
    MethodResult m{"vector_search", a.informal_name, {}};
    for (const auto& h : hits) m.ranked.push_back(h.concept_id);
    methods.push_back(std::move(m));
  }
  if (!any_hits) methods.clear();
  methods.insert(methods.end(), extra_methods.begin(), extra_methods.end());
  report.contingency = summarize(report.records);
  report.top5 = top5_comparison(annotations, methods, k);
  return report;
}

Json to_json(const EvaluationReport& report) {
  Json j;
  j["contingency"] = to_json(report.contingency);
  Json top = Json::array();
  for (const auto& r : report.top5) {
    top.push_back({{"method", r.method},
                   {"correct_in_top5", r.correct_in_top5},
                   {"relevant_in_top5", r.relevant_in_top5},
                   {"evaluated", r.evaluated}});
  }
  j["top5_comparison"] = std::move(top);
  Json records = Json::array();
  for (const auto& r : report.records) {
    records.push_back({{"informal_name", r.informal_name},
                       {"excluded", r.excluded},
                       {"exact_match", r.exact_match},
                       {"answer_in_vector_topk", r.answer_in_vector_topk},
                       {"llm_correct", r.llm_correct},
                       {"llm_relevant", r.llm_relevant}});
  }
  j["records"] = std::move(records);
  return j;
}

}  // namespace termmap::eval
