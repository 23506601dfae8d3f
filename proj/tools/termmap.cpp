#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "termmap/api_server.hpp"
#include "termmap/config.hpp"
#include "termmap/csv.hpp"
#include "termmap/error.hpp"
#include "termmap/eval_harness.hpp"
#include "termmap/pipeline.hpp"

namespace fs = std::filesystem;
using namespace termmap;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

bool g_quiet = false;

std::ostream& log() {
  static std::ostringstream sink;
  if (g_quiet) {
    sink.str({});
    return sink;
  }
  return std::cerr;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const std::string& flag) {
  if (!fs::is_regular_file(p)) throw UsageError(flag + ": file not found: " + p.string());
}

void write_output(const std::optional<fs::path>& out, const std::string& text) {
  if (!out) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(*out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::InvalidInput, "cannot write " + out->string());
  f << text;
}

Json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot open " + p.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::ValidationError, p.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  fs::path concepts;
  std::optional<fs::path> synonyms, ancestors, relationships;
  fs::path store;
  bool force = false;
};

int cmd_ingest(const IngestArgs& a) {
  require_file(a.concepts, "--concepts");
  for (const auto& [p, flag] : {std::pair{a.synonyms, "--synonyms"},
                                {a.ancestors, "--ancestors"},
                                {a.relationships, "--relationships"}}) {
    if (p) require_file(*p, flag);
  }
  if (fs::exists(a.store) && !a.force) {
    throw UsageError("store " + a.store.string() + " already exists (use --force to replace it)");
  }
  const auto stats =
      ingest_vocabulary({a.concepts, a.synonyms, a.ancestors, a.relationships}, a.store);
  log() << "ingested " << stats.concepts << " concepts, " << stats.synonyms << " synonyms, "
        << stats.ancestors << " ancestors, " << stats.relationships << " relationships; skipped "
        << stats.skipped << " rows\n";
  return kOk;
}

// ----------------------------------------------------------------- index

struct IndexArgs {
  fs::path store;
  fs::path out;
  std::string provider = "test";
  std::string endpoint;
  std::size_t dimension = HashEmbeddingProvider::kDefaultDimension;
  std::uint64_t seed = HashEmbeddingProvider::kDefaultSeed;
  bool dimension_set = false;
};

int cmd_index(const IndexArgs& a) {
  require_file(a.store, "--store");
  EmbeddingSettings settings;
  settings.provider = a.provider;
  settings.dimension = a.dimension;
  settings.seed = a.seed;
  if (a.provider == "remote") {
    if (a.endpoint.empty()) throw UsageError("--provider remote requires --endpoint");
    if (!a.dimension_set) throw UsageError("--provider remote requires --dimension");
    settings.remote.endpoint = a.endpoint;
    settings.remote.dimension = a.dimension;
  }
  const auto store = ConceptStore::load(a.store);
  if (store.size() == 0) throw Error(ErrorCode::ValidationError, "store has no concepts");
  const auto provider = make_embedding_provider(settings);
  const auto index = VectorIndex::build(store.concepts(), *provider);
  index.save(a.out);
  log() << "indexed " << index.size() << " concepts (" << index.fingerprint() << ")\n";
  return kOk;
}

// ------------------------------------------------------------------- map

struct MapArgs {
  std::optional<std::string> name;
  std::optional<fs::path> csv;
  std::optional<std::string> column;
  std::optional<std::string> mode;
  std::optional<std::size_t> k;
  std::optional<std::string> options_json;
  std::optional<fs::path> config;
  std::optional<fs::path> store;
  std::optional<fs::path> index;
  std::vector<std::string> stubs;
  std::optional<fs::path> out;
  std::string format = "json";
  std::size_t workers = 1;
};

std::vector<std::string> read_names(const MapArgs& a) {
  if (a.name) return {*a.name};
  require_file(*a.csv, "--csv");
  const auto table = csv::read_file(*a.csv);
  const auto col = table.column(*a.column);
  if (!col) {
    std::string available;
    for (const auto& h : table.header) {
      if (!available.empty()) available += ", ";
      available += h;
    }
    throw UsageError("column \"" + *a.column + "\" not found; available columns: " + available);
  }
  std::vector<std::string> names;
  names.reserve(table.rows.size());
  for (const auto& row : table.rows) names.push_back(*col < row.size() ? row[*col] : "");
  return names;
}

csv::Row flatten(const NameResult& r, PipelineMode mode) {
  std::string reply, concept_id, concept_name, score, error;
  std::ostringstream num;
  num.precision(17);
  for (const auto& e : r.events) {
    if (const auto* llm = std::get_if<LlmOutput>(&e)) {
      reply = llm->reply;
    } else if (const auto* omop = std::get_if<OmopOutput>(&e)) {
      if (!omop->concepts.empty()) {
        const auto& c = omop->concepts.front();
        concept_id = std::to_string(c.concept_id);
        concept_name = c.concept_name;
        num << c.concept_name_similarity_score;
      }
    } else if (const auto* vec = std::get_if<VectorOutput>(&e)) {
      if (!vec->hits.empty()) {
        const auto& h = vec->hits.front();
        concept_id = std::to_string(h.concept_id);
        concept_name = h.concept_name;
        num << h.score;
      }
    } else if (const auto* err = std::get_if<ErrorEvent>(&e)) {
      error = err->error;
    }
  }
  score = num.str();
  return {r.name, std::string(to_string(mode)), reply, concept_id, concept_name, score, error};
}

int cmd_map(const MapArgs& a) {
  if (a.name.has_value() == a.csv.has_value()) throw UsageError("give exactly one of --name or --csv");
  if (a.csv && !a.column) throw UsageError("--csv requires --column");
  if (a.format != "json" && a.format != "csv") throw UsageError("--format must be json or csv");

  AppConfig config;
  if (a.config) {
    require_file(*a.config, "--config");
    config = load_config(*a.config);
  }
  apply_environment(config);
  if (a.store) config.store_path = *a.store;
  if (a.index) config.index_path = *a.index;
  if (!a.stubs.empty()) {
    config.generation.backend = "stub";
    for (const auto& s : a.stubs) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--stub expects NAME=REPLY, got \"" + s + "\"");
      config.generation.stub_replies.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
  }
  for (const auto& [p, flag] : {std::pair{config.store_path, "store"}, {config.index_path, "index"}}) {
    if (p) require_file(*p, flag);
  }

  PipelineOptions options = config.pipeline_defaults;
  if (a.options_json) {
    Json j;
    try {
      j = Json::parse(*a.options_json);
    } catch (const Json::parse_error& e) {
      throw UsageError(std::string("--options: ") + e.what());
    }
    options = parse_pipeline_options(j, options);
  }
  if (a.mode) {
    const auto m = parse_mode(*a.mode);
    if (!m) throw UsageError("--mode must be one of vector_search, llm, rag, db_search");
    options.mode = *m;
  }
  if (a.k) {
    if (*a.k == 0) throw UsageError("--k must be >= 1");
    options.k = *a.k;
  }

  const auto names = read_names(a);
  const auto service = load_service(config);
  const Pipeline pipeline(service.deps());
  pipeline.require_ready(options.mode);

  const auto results = pipeline.run_batch(names, options, std::max<std::size_t>(1, a.workers));

  std::string text;
  if (a.format == "json") {
    Json out = Json::array();
    for (const auto& r : results) out.push_back(to_json(r, true));
    text = out.dump(2) + "\n";
  } else {
    std::ostringstream os;
    csv::write_row(os, {"name", "mode", "reply", "concept_id", "concept_name", "score", "error"});
    for (const auto& r : results) csv::write_row(os, flatten(r, options.mode));
    text = os.str();
  }
  write_output(a.out, text);

  if (!results.empty()) {
    std::vector<double> ms;
    ms.reserve(results.size());
    std::size_t failed = 0;
    for (const auto& r : results) {
      ms.push_back(r.elapsed.count());
      if (!r.events.empty() && std::holds_alternative<ErrorEvent>(r.events.back())) ++failed;
    }
    std::sort(ms.begin(), ms.end());
    log() << "mapped " << results.size() << " names (" << failed << " with errors); median "
          << ms[ms.size() / 2] << " ms, max " << ms.back() << " ms\n";
  }
  return kOk;
}

// ----------------------------------------------------------------- serve

struct ServeArgs {
  std::optional<fs::path> config;
  std::optional<int> port;
};

int cmd_serve(const ServeArgs& a) {
  AppConfig config;
  try {
    if (a.config) {
      require_file(*a.config, "--config");
      config = load_config(*a.config);
    }
    apply_environment(config);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (a.port) config.port = *a.port;

  // Block termination signals before any thread starts so sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const auto service = load_service(config);
  ApiServer server(config, service.deps());
  const int port = server.start();
  log() << "listening on http://" << config.host << ":" << port << "\n";
  std::cout << Json{{"host", config.host}, {"port", port}}.dump() << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  log() << "received signal " << sig << ", shutting down\n";
  server.stop();
  return kOk;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  fs::path annotations;
  std::vector<fs::path> results;
  std::optional<fs::path> methods;
  std::optional<fs::path> report;
  std::optional<fs::path> store;
  std::size_t k = 5;
};

int cmd_eval(const EvalArgs& a) {
  require_file(a.annotations, "--annotations");
  const auto annotations = eval::parse_annotations(csv::read_file(a.annotations));
  if (annotations.empty()) throw UsageError("annotation file has no rows");

  std::map<std::string, eval::Observation> observations;
  for (const auto& p : a.results) {
    require_file(p, "--results");
    eval::collect_observations(read_json_file(p), observations);
  }
  std::vector<eval::MethodResult> methods;
  if (a.methods) {
    require_file(*a.methods, "--methods");
    methods = eval::parse_method_results(csv::read_file(*a.methods));
  }

  std::optional<ConceptStore> store;
  eval::NameLookup lookup;
  if (a.store) {
    require_file(*a.store, "--store");
    store = ConceptStore::load(*a.store);
    lookup = [&store](ConceptId id) -> std::optional<std::string> {
      if (const auto* c = store->find(id)) return c->concept_name;
      return std::nullopt;
    };
  }

  const auto report = eval::evaluate(annotations, observations, methods, lookup, a.k);
  const auto json = eval::to_json(report).dump(2) + "\n";
  if (a.report) {
    write_output(a.report, json);
    std::cout << eval::format_table(report.contingency) << "\n"
              << eval::format_table(report.top5);
  } else {
    std::cout << json;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"termmap: map informal medical terms to standard vocabulary concepts"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress messages on stderr");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Load tab-separated vocabulary files into a store");
  ingest_cmd->add_option("--concepts", ingest.concepts, "CONCEPT table")->required();
  ingest_cmd->add_option("--synonyms", ingest.synonyms, "CONCEPT_SYNONYM table");
  ingest_cmd->add_option("--ancestors", ingest.ancestors, "CONCEPT_ANCESTOR table");
  ingest_cmd->add_option("--relationships", ingest.relationships, "CONCEPT_RELATIONSHIP table");
  ingest_cmd->add_option("--store", ingest.store, "Output store file")->required();
  ingest_cmd->add_flag("--force", ingest.force, "Replace an existing store");

  IndexArgs index;
  auto* index_cmd = app.add_subcommand("index", "Build a vector index over a store");
  index_cmd->add_option("--store", index.store, "Store file")->required();
  index_cmd->add_option("--out", index.out, "Output index file")->required();
  index_cmd->add_option("--provider", index.provider, "Embedding provider")
      ->check(CLI::IsMember({"test", "remote"}));
  index_cmd->add_option("--endpoint", index.endpoint, "Remote embedding endpoint URL");
  auto* dim_opt = index_cmd->add_option("--dimension", index.dimension, "Embedding dimension")
                      ->check(CLI::PositiveNumber);
  index_cmd->add_option("--seed", index.seed, "Seed for the test provider");

  MapArgs map;
  auto* map_cmd = app.add_subcommand("map", "Map names from the command line or a CSV column");
  auto* name_opt = map_cmd->add_option("--name", map.name, "A single informal name");
  auto* csv_opt = map_cmd->add_option("--csv", map.csv, "CSV file with a header row");
  name_opt->excludes(csv_opt);
  map_cmd->add_option("--column", map.column, "CSV column holding the names");
  map_cmd->add_option("--mode", map.mode, "vector_search | llm | rag | db_search");
  map_cmd->add_option("--k", map.k, "Number of vector hits");
  map_cmd->add_option("--options", map.options_json, "Pipeline options as a JSON object");
  map_cmd->add_option("--config", map.config, "Service configuration file");
  map_cmd->add_option("--store", map.store, "Store file");
  map_cmd->add_option("--index", map.index, "Index file");
  map_cmd->add_option("--stub", map.stubs, "Stub generation reply NAME=REPLY (repeatable)");
  map_cmd->add_option("--out", map.out, "Output file (default stdout)");
  map_cmd->add_option("--format", map.format, "json | csv");
  map_cmd->add_option("--workers", map.workers, "Concurrent names")->check(CLI::PositiveNumber);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--config", serve.config, "Service configuration file");
  serve_cmd->add_option("--port", serve.port, "Override the configured port (0 = any)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score pipeline results against annotations");
  eval_cmd->add_option("--annotations", ev.annotations, "Annotation CSV")->required();
  eval_cmd->add_option("--results", ev.results, "Batch result JSON from `map` (repeatable)");
  eval_cmd->add_option("--methods", ev.methods, "Per-method ranked results CSV");
  eval_cmd->add_option("--report", ev.report, "Write the JSON report here");
  eval_cmd->add_option("--store", ev.store, "Store used to resolve concept names");
  eval_cmd->add_option("--k", ev.k, "Top-k cut-off")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  index.dimension_set = dim_opt->count() > 0;

  try {
    if (*ingest_cmd) return cmd_ingest(ingest);
    if (*index_cmd) return cmd_index(index);
    if (*map_cmd) return cmd_map(map);
    if (*serve_cmd) return cmd_serve(serve);
    if (*eval_cmd) return cmd_eval(ev);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    const bool usage = e.code() == ErrorCode::ValidationError ||
                       e.code() == ErrorCode::InvalidInput ||
                       e.code() == ErrorCode::IngestError;
    return usage ? kUsage : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
