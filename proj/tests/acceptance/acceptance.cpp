#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "oracles.hpp"
#include "preprocess_cases.hpp"
#include "termmap/api_server.hpp"
#include "termmap/csv.hpp"
#include "termmap/error.hpp"
#include "termmap/eval_harness.hpp"
#include "termmap/fuzzy.hpp"
#include "termmap/text.hpp"

using namespace termmap;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome fuzzy_fidelity() {
  const double exact = indel_similarity("Betamethasone", "betamethasone");
  const double partial = indel_similarity("Betamethasone", "betamethasone 1 MG");
  const bool ok = std::abs(exact - 100.0) <= 1e-9 && std::abs(partial - 83.87096774193549) <= 1e-9;
  return {ok, fmt("scores %.14f and %.14f", exact, partial)};
}

Outcome fuzzy_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240816);
  const std::string alphabet = "abcdefghijABCDEFGHIJ 0123-/";
  std::size_t mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = testsupport::random_string(rng, 40, alphabet);
    const auto b = testsupport::random_string(rng, 40, alphabet);
    const auto la = testsupport::ascii_lower(a);
    const auto lb = testsupport::ascii_lower(b);
    if (indel_distance(la, lb) != testsupport::dp_indel_distance(la, lb) ||
        indel_similarity(a, b) != testsupport::dp_indel_similarity(a, b)) {
      ++mismatches;
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 30.0,
          fmt("10000 pairs, %zu mismatches, %.2f s", mismatches, secs)};
}

Outcome preprocessing() {
  std::size_t failures = 0;
  std::string first_failure;
  const auto& cases = testsupport::preprocess_cases();
  for (const auto& c : cases) {
    std::string got;
    try {
      got = preprocess_search_term(c.raw).rendered;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyQuery) got = "<error>";
    }
    if (got != c.rendered) {
      if (failures++ == 0) first_failure = std::string(c.raw) + " -> " + got;
    }
  }
  const bool headline =
      preprocess_search_term("paracetamol and caffeine").rendered == "paracetamol | caffeine";
  std::string detail = fmt("%zu cases, %zu failures", cases.size(), failures);
  if (!first_failure.empty()) detail += " (first: " + first_failure + ")";
  return {headline && failures == 0 && cases.size() >= 21, detail};
}

Outcome top_k_oracle() {
  const auto start = Clock::now();
  HashEmbeddingProvider provider;
  std::mt19937_64 rng(7);
  std::size_t checked = 0;
  std::size_t mismatches = 0;
  for (const std::size_t n : {1000u, 10000u}) {
    const auto index = VectorIndex::build(testsupport::synthetic_concepts(n), provider);
    for (int q = 0; q < 100; ++q) {
      const auto text = testsupport::random_string(rng, 24, "abcdefghijklmnopqrstuvwxyz ");
      const auto query = provider.embed(text);
      for (const std::size_t k : {1u, 5u, 10u}) {
        const auto got = index.query_top_k(text, k, provider);
        const auto want = testsupport::brute_force_top_k(index, query, k);
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i) {
          same = got[i].concept_id == want[i].concept_id &&
                 std::abs(got[i].score - want[i].score) <= 1e-9;
        }
        ++checked;
        if (!same) ++mismatches;
      }
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 60.0,
          fmt("%zu queries, %zu mismatches, %.2f s", checked, mismatches, secs)};
}

Outcome perfect_match() {
  HashEmbeddingProvider provider;
  const auto concepts = testsupport::synthetic_concepts(500);
  const auto index = VectorIndex::build(concepts, provider);
  std::size_t failures = 0;
  for (const auto& c : concepts) {
    const auto hits = index.query_top_k(c.concept_name, 1, provider);
    if (hits.empty() || hits[0].concept_id != c.concept_id ||
        std::abs(hits[0].score - 1.0) > 1e-6) {
      ++failures;
    }
  }
  return {failures == 0, fmt("%zu concepts, %zu failures", concepts.size(), failures)};
}

Outcome rag_gate() {
  HashEmbeddingProvider provider;
  const auto concepts = testsupport::synthetic_concepts(500);
  const auto store = ConceptStore::from_concepts(concepts);
  const auto index = VectorIndex::build(concepts, provider);
  StubBackend backend;
  backend.set_fallback("mab");
  const Pipeline pipeline({&store, &index, &provider, &backend});
  const PipelineOptions options;

  std::vector<std::string> queries;
  for (std::size_t i = 0; i < concepts.size(); i += 5) queries.push_back(concepts[i].concept_name);
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    queries.push_back(testsupport::random_string(rng, 30, "abcdefghijklmnopqrstuvwxyz "));
  }

  std::size_t above = 0, below = 0, violations = 0;
  for (const auto& q : queries) {
    if (trim(q).empty()) continue;
    const auto hits = index.query_top_k(q, options.k, provider);
    const bool gated = !exceeds_exact_threshold(hits, options.exact_match_threshold).empty();
    backend.reset_call_count();
    pipeline.run_rag(q, options);
    const auto calls = backend.call_count();
    if (gated) {
      ++above;
      if (calls != 0) ++violations;
    } else {
      ++below;
      if (calls != 1) ++violations;
    }
  }
  return {violations == 0 && above > 0 && below > 0,
          fmt("%zu gated, %zu generated, %zu violations", above, below, violations)};
}

// Same keys in the same order at every level; arrays compared element-wise.
bool same_shape(const Json& a, const Json& b) {
  if (a.type() != b.type()) {
    return a.is_number() && b.is_number();
  }
  if (a.is_object()) {
    if (a.size() != b.size()) return false;
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib) {
      if (ia.key() != ib.key() || !same_shape(ia.value(), ib.value())) return false;
    }
    return true;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!same_shape(a[i], b[i])) return false;
    }
  }
  return true;
}

Json read_fixture_json(const char* name) {
  std::ifstream in(testsupport::fixture_dir() / name);
  return Json::parse(in);
}

Outcome golden_end_to_end() {
  const auto store = testsupport::fixture_store();
  HashEmbeddingProvider provider;
  const auto index = VectorIndex::build(store.concepts(), provider);
  StubBackend backend({{"Betnovate Scalp Application", "Betamethasone"}});
  AppConfig config;
  config.port = 0;
  ApiServer server(config, {&store, &index, &provider, &backend});
  httplib::Client client("127.0.0.1", server.start());
  const auto res = client.Post(
      "/api/pipeline",
      R"({"names":["Betnovate Scalp Application"],"pipeline_options":{"mode":"rag"}})",
      "application/json");
  server.stop();
  if (!res || res->status != 200) {
    return {false, fmt("HTTP status %d", res ? res->status : -1)};
  }
  const auto body = Json::parse(res->body);
  const auto& events = body.at(0).at("events");
  if (events.size() != 2 || events[0]["event"] != "llm_output" ||
      events[1]["event"] != "omop_output") {
    return {false, "unexpected event sequence"};
  }
  const auto& llm = events[0]["payload"];
  const auto& omop = events[1]["payload"];
  const auto ref_llm = read_fixture_json("reference_llm_output.json");
  const auto ref_omop = read_fixture_json("reference_omop_output.json");

  const bool llm_ok = same_shape(llm, ref_llm) && llm["reply"] == "Betamethasone" &&
                      llm["informal_name"] == "Betnovate Scalp Application";
  const bool omop_ok = omop.dump() == ref_omop.dump();
  const auto& concepts = omop["CONCEPT"];
  const bool values_ok = concepts.size() == 2 && concepts[0]["concept_id"] == 920458 &&
                         concepts[1]["concept_id"] == 920827 &&
                         std::abs(concepts[0]["concept_name_similarity_score"].get<double>() -
                                  100.0) <= 1e-9 &&
                         std::abs(concepts[1]["concept_name_similarity_score"].get<double>() -
                                  83.87096774193549) <= 1e-9;
  return {llm_ok && omop_ok && values_ok,
          fmt("llm_output shape %s, omop_output %s, ids/scores %s", llm_ok ? "ok" : "differs",
              omop_ok ? "identical" : "differs", values_ok ? "ok" : "differ")};
}

Outcome eval_arithmetic() {
  using namespace termmap::eval;
  std::mt19937_64 rng(400);
  std::uniform_int_distribution<int> pick(0, 9);
  std::vector<AnnotatedExample> annotations;
  std::vector<AssessmentRecord> records;
  std::vector<MethodResult> methods;
  for (int i = 0; i < 400; ++i) {
    const auto name = "informal " + std::to_string(i);
    AnnotatedExample e;
    e.informal_name = name;
    e.parsable = pick(rng) != 0;
    if (e.parsable) {
      const ConceptId best = 1 + pick(rng);
      e.best_concept_id = best;
      e.acceptable_concept_ids = {best, best + 10, best + 20};
    }
    std::vector<VectorHit> hits;
    const int nhits = pick(rng) % 6;
    for (int h = 0; h < nhits; ++h) {
      hits.push_back({static_cast<ConceptId>(1 + pick(rng) * 3), pick(rng) == 0 ? name : "x", 0.5});
    }
    std::optional<ConceptId> llm;
    if (pick(rng) > 0) llm = 1 + pick(rng) + 10 * (pick(rng) % 3);
    records.push_back(classify(e, hits, llm));
    for (const char* method : {"vector_search", "rag", "fuzzy"}) {
      MethodResult m{method, name, {}};
      for (int r = 0; r < 1 + pick(rng) % 7; ++r) m.ranked.push_back(1 + pick(rng) * 2);
      methods.push_back(std::move(m));
    }
    annotations.push_back(std::move(e));
  }
  const auto report = summarize(records);
  const auto t = report.totals();
  const bool cells = report.in_vector.total() == report.in_vector.correct + report.in_vector.incorrect &&
                     report.not_in_vector.total() ==
                         report.not_in_vector.correct + report.not_in_vector.incorrect &&
                     t.correct == report.in_vector.correct + report.not_in_vector.correct &&
                     t.incorrect == report.in_vector.incorrect + report.not_in_vector.incorrect;
  const bool rows = report.total == 400 &&
                    report.not_parsable + report.exact_match + t.total() == 400;
  bool relevant_ok = true;
  const auto top5 = top5_comparison(annotations, methods);
  for (const auto& r : top5) relevant_ok = relevant_ok && r.relevant_in_top5 >= r.correct_in_top5;
  return {cells && rows && report.additive() && relevant_ok && top5.size() == 3,
          fmt("total %zu = %zu not parsable + %zu exact + %zu assessed; %zu methods relevant>=correct %s",
              report.total, report.not_parsable, report.exact_match, t.total(), top5.size(),
              relevant_ok ? "yes" : "no")};
}

std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome batch_throughput(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given"};
  testsupport::TempDir dir;
  constexpr std::size_t kConcepts = 100000;
  constexpr std::size_t kNames = 1000;
  {
    std::ofstream out(dir / "CONCEPT.tsv");
    out << "concept_id\tconcept_name\tdomain_id\tvocabulary_id\tconcept_class_id\t"
           "standard_concept\tconcept_code\tvalid_start_date\tvalid_end_date\tinvalid_reason\n";
    for (const auto& c : testsupport::synthetic_concepts(kConcepts)) {
      out << c.concept_id << '\t' << c.concept_name << "\tDrug\tRxNorm\tClinical Drug\tS\t"
          << c.concept_code << "\t19700101\t20991231\t\n";
    }
  }
  {
    std::ofstream out(dir / "names.csv");
    out << "informal_name\n";
    std::mt19937_64 rng(1000);
    std::uniform_int_distribution<std::size_t> pick(0, kConcepts - 1);
    for (std::size_t i = 0; i < kNames; ++i) {
      auto name = testsupport::synthetic_name(pick(rng));
      name[0] = static_cast<char>(name[0] - 'a' + 'A');
      if (i % 3 == 0) name.erase(name.size() / 2, 1);
      out << csv::escape(name) << '\n';
    }
  }
  const auto store = dir / "store.bin";
  const auto out = dir / "out.csv";
  if (run_command(shell_quote(cli) + " -q ingest --concepts " +
                  shell_quote((dir / "CONCEPT.tsv").string()) + " --store " +
                  shell_quote(store.string())) != 0) {
    return {false, "ingest failed"};
  }
  const auto start = Clock::now();
  const int code = run_command(shell_quote(cli) + " -q map --csv " +
                               shell_quote((dir / "names.csv").string()) +
                               " --column informal_name --mode db_search --format csv --store " +
                               shell_quote(store.string()) + " --out " + shell_quote(out.string()));
  const double secs = seconds_since(start);
  if (code != 0) return {false, fmt("map exited %d", code)};
  const auto table = csv::read_file(out);
  const auto names = table.rows.size();
  const auto col = table.column("concept_id");
  std::set<std::string> mapped;
  for (const auto& r : table.rows) {
    if (col && !r.at(0).empty() && !r.at(*col).empty()) mapped.insert(r.at(0));
  }
  return {secs < 60.0 && mapped.size() > 0 && names >= kNames,
          fmt("%zu names against %zu concepts in %.2f s, %zu mapped", kNames, kConcepts, secs,
              mapped.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string cli;
  app.add_option("--cli", cli, "Path to the termmap executable");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"fuzzy_formula_fidelity", fuzzy_fidelity},
      {"fuzzy_oracle_suite", fuzzy_oracle},
      {"preprocessing_fidelity", preprocessing},
      {"top_k_oracle", top_k_oracle},
      {"perfect_match_property", perfect_match},
      {"rag_gate", rag_gate},
      {"golden_end_to_end", golden_end_to_end},
      {"eval_arithmetic", eval_arithmetic},
      {"batch_throughput", [&] { return batch_throughput(cli); }},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
