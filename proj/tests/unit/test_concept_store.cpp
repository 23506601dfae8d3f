#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "oracles.hpp"
#include "termmap/concept_store.hpp"
#include "termmap/error.hpp"

using namespace termmap;
using testsupport::TempDir;

namespace {

const std::string kHeader =
    "concept_id\tconcept_name\tdomain_id\tvocabulary_id\tconcept_class_id\tstandard_concept\t"
    "concept_code\n";

std::filesystem::path write(const TempDir& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::vector<ConceptId> ids(const std::vector<Concept>& cs) {
  std::vector<ConceptId> out;
  for (const auto& c : cs) out.push_back(c.concept_id);
  return out;
}

SearchQuery terms(std::vector<std::string> t) {
  SearchQuery q;
  q.terms = std::move(t);
  return q;
}

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("ingest the three-concept fixture") {
  TempDir dir;
  const auto stats = ingest_vocabulary(testsupport::fixture_files(), dir / "store.bin");
  CHECK(stats.concepts == 3);
  CHECK(stats.synonyms == 1);
  CHECK(stats.ancestors == 1);
  CHECK(stats.relationships == 1);
  CHECK(stats.skipped == 0);

  const auto store = ConceptStore::load(dir / "store.bin");
  REQUIRE(store.size() == 3);
  const auto* c = store.find(920827);
  REQUIRE(c != nullptr);
  CHECK(c->concept_name == "betamethasone 1 MG");
  CHECK(c->vocabulary_id == "RxNorm");
  CHECK(c->concept_code == "332616");
  CHECK(c->domain_id == "Drug");
  CHECK(c->standard_concept == std::optional<char>('S'));
}

TEST_CASE("header-only file gives an empty store") {
  TempDir dir;
  IngestStats stats;
  const auto store = ConceptStore::from_files({write(dir, "c.tsv", kHeader)}, &stats);
  CHECK(stats.concepts == 0);
  CHECK(stats.skipped == 0);
  CHECK(store.size() == 0);
}

TEST_CASE("non-numeric concept_id is skipped and counted") {
  TempDir dir;
  IngestStats stats;
  ConceptStore::from_files({write(dir, "c.tsv", kHeader + "abc\tfoo\tDrug\tRxNorm\tX\tS\t1\n")},
                           &stats);
  CHECK(stats.concepts == 0);
  CHECK(stats.skipped == 1);
}

TEST_CASE("malformed rows are skipped, not fatal") {
  TempDir dir;
  const std::string rows = kHeader +
                           "1\tgood\tDrug\tRxNorm\tX\tS\t1\n"
                           "2\t   \tDrug\tRxNorm\tX\tS\t2\n"   // blank name
                           "3\tshort row\n"                     // too few fields
                           "1\tduplicate\tDrug\tRxNorm\tX\tS\t1\n"
                           "-4\tnegative\tDrug\tRxNorm\tX\tS\t4\n"
                           "5\talso good\tDrug\tSNOMED\tX\t\t5\n";
  IngestStats stats;
  const auto store = ConceptStore::from_files({write(dir, "c.tsv", rows)}, &stats);
  CHECK(stats.concepts == 2);
  CHECK(stats.skipped == 4);
  CHECK(store.find(5)->standard_concept == std::nullopt);
}

TEST_CASE("missing required column names the column") {
  TempDir dir;
  const auto p = write(dir, "c.tsv", "concept_id\tconcept_name\tvocabulary_id\tdomain_id\n");
  try {
    ConceptStore::from_files({p});
    FAIL("expected IngestError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IngestError);
    CHECK(std::string(e.what()).find("concept_code") != std::string::npos);
  }
}

TEST_CASE("text_search examples over the fixture") {
  const auto store = testsupport::fixture_store();
  CHECK(ids(store.text_search(terms({"betamethasone"}), 10)) ==
        std::vector<ConceptId>{920458, 920827});
  CHECK(store.text_search(terms({"zzzz"}), 10).empty());
  CHECK(ids(store.text_search(terms({"betamethasone", "acetaminophen"}), 10)) ==
        std::vector<ConceptId>{920458, 920827, 1125315});
}

TEST_CASE("text_search orders by matched-term count then id") {
  const auto store = testsupport::fixture_store();
  CHECK(ids(store.text_search(terms({"betamethasone", "mg"}), 10)) ==
        std::vector<ConceptId>{920827, 920458});
  CHECK(ids(store.text_search(terms({"betamethasone"}), 1)) == std::vector<ConceptId>{920458});
}

TEST_CASE("vocabulary filter and synonyms") {
  auto concepts = testsupport::synthetic_concepts(0);
  concepts.push_back({1, "aspirin", "RxNorm", "1", "Drug", 'S'});
  concepts.push_back({2, "aspirin 81 MG", "SNOMED", "2", "Drug", 'S'});
  auto store = ConceptStore::from_concepts(concepts);
  store.add_synonym(1, "acetylsalicylic acid");

  auto q = terms({"aspirin"});
  CHECK(ids(store.text_search(q, 10)) == std::vector<ConceptId>{1, 2});
  q.vocabulary_filter = std::vector<std::string>{"SNOMED"};
  CHECK(ids(store.text_search(q, 10)) == std::vector<ConceptId>{2});

  auto syn = terms({"acetylsalicylic"});
  CHECK(store.text_search(syn, 10).empty());
  syn.include_synonyms = true;
  CHECK(ids(store.text_search(syn, 10)) == std::vector<ConceptId>{1});
}

TEST_CASE("fetch_concept_details honours the flags") {
  const auto store = testsupport::fixture_store();
  const auto none = store.fetch_concept_details(920458, {});
  CHECK(none.entry.concept_name == "betamethasone");
  CHECK(none.synonyms.empty());
  CHECK(none.ancestors.empty());
  CHECK(none.relationships.empty());

  const auto syn = store.fetch_concept_details(920458, {true, false, false});
  CHECK(syn.synonyms == std::vector<std::string>{"betamethasone valerate"});

  const auto all = store.fetch_concept_details(920827, {true, true, true});
  REQUIRE(all.ancestors.size() == 1);
  CHECK(all.ancestors[0].ancestor_concept_id == 920458);
  CHECK(all.ancestors[0].levels_of_separation == 1);
  REQUIRE(all.relationships.size() == 1);
  CHECK(all.relationships[0].relationship_id == "Has ingredient");
  CHECK(all.relationships[0].concept_id_2 == 920458);

  CHECK(error_of([&] { store.fetch_concept_details(999999999, {}); }) == ErrorCode::NotFound);
}

TEST_CASE("unloaded store refuses queries") {
  const ConceptStore store;
  CHECK_FALSE(store.loaded());
  CHECK(error_of([&] { store.text_search(terms({"x"}), 1); }) == ErrorCode::StoreUnavailable);
  CHECK(error_of([&] { store.fetch_concept_details(1, {}); }) == ErrorCode::StoreUnavailable);
}

TEST_CASE("save/load round trip is lossless") {
  TempDir dir;
  const auto store = testsupport::fixture_store();
  store.save(dir / "a.bin");
  const auto back = ConceptStore::load(dir / "a.bin");
  CHECK(back.concepts() == store.concepts());
  for (const auto& c : store.concepts()) {
    const auto a = store.fetch_concept_details(c.concept_id, {true, true, true});
    const auto b = back.fetch_concept_details(c.concept_id, {true, true, true});
    CHECK(a.synonyms == b.synonyms);
    CHECK(a.ancestors == b.ancestors);
    CHECK(a.relationships == b.relationships);
  }
  back.save(dir / "b.bin");
  std::ifstream fa(dir / "a.bin", std::ios::binary), fb(dir / "b.bin", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {});
  const std::string sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
}

TEST_CASE("corrupt store files are rejected") {
  TempDir dir;
  write(dir, "bad.bin", "not a store");
  CHECK(error_of([&] { ConceptStore::load(dir / "bad.bin"); }) == ErrorCode::FormatError);
  testsupport::fixture_store().save(dir / "ok.bin");
  std::filesystem::resize_file(dir / "ok.bin", 30);
  CHECK(error_of([&] { ConceptStore::load(dir / "ok.bin"); }) == ErrorCode::FormatError);
}

TEST_CASE("property: every concept is found by each token of its name") {
  const auto store = ConceptStore::from_concepts(testsupport::synthetic_concepts(2000));
  for (const auto& c : store.concepts()) {
    for (const auto& token : tokenize(c.concept_name)) {
      if (is_stop_word(token)) continue;
      const auto hits = store.text_search(terms({token}), store.size());
      const bool found = std::any_of(hits.begin(), hits.end(),
                                     [&](const Concept& h) { return h.concept_id == c.concept_id; });
      CAPTURE(c.concept_name);
      CAPTURE(token);
      CHECK(found);
    }
  }
}

TEST_CASE("property: OR semantics is set union, results deterministic") {
  const auto store = ConceptStore::from_concepts(testsupport::synthetic_concepts(3000));
  std::vector<std::string> vocab;
  for (const auto& c : store.concepts()) {
    for (auto& t : tokenize(c.concept_name)) vocab.push_back(std::move(t));
  }
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  for (int i = 0; i < 200; ++i) {
    const auto a = vocab[pick(rng)];
    const auto b = vocab[pick(rng)];
    const auto ra = ids(store.text_search(terms({a}), store.size()));
    const auto rb = ids(store.text_search(terms({b}), store.size()));
    const auto rab = ids(store.text_search(terms({a, b}), store.size()));
    std::set<ConceptId> expected(ra.begin(), ra.end());
    expected.insert(rb.begin(), rb.end());
    CHECK(std::set<ConceptId>(rab.begin(), rab.end()) == expected);
    CHECK(ids(store.text_search(terms({a, b}), store.size())) == rab);
  }
}
