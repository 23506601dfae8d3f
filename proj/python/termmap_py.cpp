#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "termmap/error.hpp"
#include "termmap/events.hpp"
#include "termmap/fuzzy.hpp"
#include "termmap/pipeline.hpp"

namespace py = pybind11;
using namespace termmap;

namespace {

PipelineOptions options_from(const std::string& json_text) {
  if (json_text.empty()) return {};
  return parse_pipeline_options(Json::parse(json_text));
}

// Holds the collaborators a Python-side pipeline refers to.
struct PyPipeline {
  const ConceptStore* store;
  const VectorIndex* index;
  const EmbeddingProvider* embedder;
  GenerationBackend* backend;

  Pipeline pipeline() const { return Pipeline(PipelineDeps{store, index, embedder, backend}); }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Terminology mapping engine";

  static py::exception<Error> error_type(m, "TermmapError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<SearchQuery>(m, "SearchQuery")
      .def_readonly("terms", &SearchQuery::terms)
      .def_readonly("rendered", &SearchQuery::rendered);
  m.def("preprocess_search_term", &preprocess_search_term, py::arg("raw"));

  m.def("indel_similarity", &indel_similarity, py::arg("a"), py::arg("b"));

  py::class_<Concept>(m, "Concept")
      .def(py::init([](ConceptId id, std::string name, std::string vocabulary, std::string code,
                       std::string domain) {
             Concept c;
             c.concept_id = id;
             c.concept_name = std::move(name);
             c.vocabulary_id = std::move(vocabulary);
             c.concept_code = std::move(code);
             c.domain_id = std::move(domain);
             return c;
           }),
           py::arg("concept_id"), py::arg("concept_name"), py::arg("vocabulary_id") = "RxNorm",
           py::arg("concept_code") = "", py::arg("domain_id") = "Drug")
      .def_readwrite("concept_id", &Concept::concept_id)
      .def_readwrite("concept_name", &Concept::concept_name)
      .def_readwrite("vocabulary_id", &Concept::vocabulary_id)
      .def_readwrite("concept_code", &Concept::concept_code)
      .def_readwrite("domain_id", &Concept::domain_id)
      .def("__repr__", [](const Concept& c) {
        return "Concept(" + std::to_string(c.concept_id) + ", '" + c.concept_name + "')";
      });

  py::class_<ScoredConcept>(m, "ScoredConcept")
      .def_readonly("concept", &ScoredConcept::entry)
      .def_readonly("similarity", &ScoredConcept::similarity);
  m.def("rank_candidates", &rank_candidates, py::arg("search_term"), py::arg("candidates"),
        py::arg("threshold"));

  py::class_<ConceptStore>(m, "ConceptStore")
      .def_static("from_concepts", &ConceptStore::from_concepts, py::arg("concepts"))
      .def_static("load", &ConceptStore::load, py::arg("path"))
      .def_static(
          "from_files",
          [](const std::filesystem::path& concepts, std::optional<std::filesystem::path> synonyms,
             std::optional<std::filesystem::path> ancestors,
             std::optional<std::filesystem::path> relationships) {
            return ConceptStore::from_files({concepts, synonyms, ancestors, relationships});
          },
          py::arg("concepts"), py::arg("synonyms") = py::none(), py::arg("ancestors") = py::none(),
          py::arg("relationships") = py::none())
      .def("save", &ConceptStore::save, py::arg("path"))
      .def("__len__", &ConceptStore::size)
      .def(
          "text_search",
          [](const ConceptStore& s, const std::string& term, std::size_t limit) {
            return s.text_search(preprocess_search_term(term), limit);
          },
          py::arg("term"), py::arg("limit") = 1000)
      .def(
          "concept_details_json",
          [](const ConceptStore& s, ConceptId id, bool synonyms, bool ancestors,
             bool relationships) {
            return to_json(s.fetch_concept_details(id, {synonyms, ancestors, relationships})).dump();
          },
          py::arg("concept_id"), py::arg("synonyms") = false, py::arg("ancestors") = false,
          py::arg("relationships") = false);

  py::class_<EmbeddingProvider>(m, "EmbeddingProvider")
      .def_property_readonly("dimension", &EmbeddingProvider::dimension)
      .def_property_readonly("fingerprint", &EmbeddingProvider::fingerprint)
      .def("embed", &EmbeddingProvider::embed, py::arg("text"));
  py::class_<HashEmbeddingProvider, EmbeddingProvider>(m, "HashEmbeddingProvider")
      .def(py::init<std::size_t, std::uint64_t>(),
           py::arg("dimension") = HashEmbeddingProvider::kDefaultDimension,
           py::arg("seed") = HashEmbeddingProvider::kDefaultSeed);

  py::class_<VectorHit>(m, "VectorHit")
      .def_readonly("concept_id", &VectorHit::concept_id)
      .def_readonly("concept_name", &VectorHit::concept_name)
      .def_readonly("score", &VectorHit::score);

  py::class_<VectorIndex>(m, "VectorIndex")
      .def_static(
          "build",
          [](const ConceptStore& store, const EmbeddingProvider& provider) {
            return VectorIndex::build(store.concepts(), provider);
          },
          py::arg("store"), py::arg("provider"))
      .def_static("load", &VectorIndex::load, py::arg("path"))
      .def("save", &VectorIndex::save, py::arg("path"))
      .def("__len__", &VectorIndex::size)
      .def_property_readonly("dimension", &VectorIndex::dimension)
      .def_property_readonly("fingerprint", &VectorIndex::fingerprint)
      .def("query_top_k", &VectorIndex::query_top_k, py::arg("text"), py::arg("k"),
           py::arg("provider"));

  py::class_<GenerationBackend>(m, "GenerationBackend");
  py::class_<StubBackend, GenerationBackend>(m, "StubBackend")
      .def(py::init<std::vector<std::pair<std::string, std::string>>>(), py::arg("replies"))
      .def("set_fallback", &StubBackend::set_fallback, py::arg("reply"))
      .def("set_token_counts", &StubBackend::set_token_counts)
      .def_property_readonly("call_count", &StubBackend::call_count)
      .def("reset_call_count", &StubBackend::reset_call_count);

  py::class_<PyPipeline>(m, "Pipeline")
      .def(py::init([](const ConceptStore* store, const VectorIndex* index,
                       const EmbeddingProvider* embedder, GenerationBackend* backend) {
             return PyPipeline{store, index, embedder, backend};
           }),
           py::arg("store") = nullptr, py::arg("index") = nullptr, py::arg("provider") = nullptr,
           py::arg("backend") = nullptr, py::keep_alive<1, 2>(), py::keep_alive<1, 3>(),
           py::keep_alive<1, 4>(), py::keep_alive<1, 5>())
      .def(
          "run_json",
          [](const PyPipeline& p, std::vector<std::string> names, const std::string& options) {
            const auto opts = options_from(options);
            const auto pipeline = p.pipeline();
            std::vector<NameResult> results;
            {
              py::gil_scoped_release release;
              pipeline.require_ready(opts.mode);
              results = pipeline.run_batch(names, opts);
            }
            Json out = Json::array();
            for (const auto& r : results) out.push_back(to_json(r, opts.report_timing));
            return out.dump();
          },
          py::arg("names"), py::arg("options") = "");
}
