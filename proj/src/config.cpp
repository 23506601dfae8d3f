#include "termmap/config.hpp"

#include <cstdlib>
#include <fstream>

#include "termmap/error.hpp"

namespace termmap {

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::ValidationError, "config: " + what);
}

template <typename T>
T read(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    invalid(key + " has the wrong type");
  }
}

std::chrono::milliseconds read_ms(const Json& j, const std::string& key) {
  const auto ms = read<std::int64_t>(j, key);
  if (ms <= 0) invalid(key + " must be positive");
  return std::chrono::milliseconds(ms);
}

std::size_t read_count(const Json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 1) {
    invalid(key + " must be an integer >= 1");
  }
  return static_cast<std::size_t>(j.get<std::int64_t>());
}

void parse_embedding(const Json& j, EmbeddingSettings& e) {
  if (!j.is_object()) invalid("embedding must be an object");
  for (const auto& [key, v] : j.items()) {
    const auto path = "embedding." + key;
    if (key == "provider") {
      e.provider = read<std::string>(v, path);
      if (e.provider != "test" && e.provider != "remote") {
        invalid("embedding.provider must be \"test\" or \"remote\"");
      }
    } else if (key == "dimension") {
      e.dimension = read_count(v, path);
      e.remote.dimension = e.dimension;
    } else if (key == "seed") {
      e.seed = read<std::uint64_t>(v, path);
    } else if (key == "endpoint") {
      e.remote.endpoint = read<std::string>(v, path);
    } else if (key == "timeout_ms") {
      e.remote.timeout = read_ms(v, path);
    } else if (key == "max_connections") {
      e.remote.max_connections = read_count(v, path);
    } else if (key == "batch_size") {
      e.remote.batch_size = read_count(v, path);
    } else if (key == "model") {
      e.remote.model_name = read<std::string>(v, path);
    } else {
      invalid("unknown key " + path);
    }
  }
}

void parse_generation(const Json& j, GenerationSettings& g) {
  if (!j.is_object()) invalid("generation must be an object");
  for (const auto& [key, v] : j.items()) {
    const auto path = "generation." + key;
    if (key == "backend") {
      g.backend = read<std::string>(v, path);
      if (g.backend != "remote" && g.backend != "stub" && g.backend != "none") {
        invalid("generation.backend must be \"remote\", \"stub\" or \"none\"");
      }
    } else if (key == "base_url") {
      g.remote.base_url = read<std::string>(v, path);
    } else if (key == "completions_path") {
      g.remote.completions_path = read<std::string>(v, path);
    } else if (key == "health_path") {
      g.remote.health_path = read<std::string>(v, path);
    } else if (key == "model") {
      g.remote.model = read<std::string>(v, path);
    } else if (key == "timeout_ms") {
      g.remote.timeout = read_ms(v, path);
    } else if (key == "max_in_flight") {
      g.remote.max_in_flight = read_count(v, path);
    } else if (key == "stub_replies") {
      if (!v.is_object()) invalid("generation.stub_replies must be an object");
      for (const auto& [k, reply] : v.items()) {
        g.stub_replies.emplace_back(k, read<std::string>(reply, path + "." + k));
      }
    } else if (key == "stub_fallback") {
      g.stub_fallback = read<std::string>(v, path);
    } else {
      invalid("unknown key " + path);
    }
  }
}

}  // namespace

AppConfig config_from_json(const Json& j) {
  if (!j.is_object()) invalid("top level must be an object");
  AppConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "store") {
      c.store_path = read<std::string>(v, key);
    } else if (key == "index") {
      c.index_path = read<std::string>(v, key);
    } else if (key == "host") {
      c.host = read<std::string>(v, key);
    } else if (key == "port") {
      const auto port = read<int>(v, key);
      if (port < 0 || port > 65535) invalid("port must be in [0, 65535]");
      c.port = port;
    } else if (key == "cors_origin") {
      c.cors_origin = read<std::string>(v, key);
    } else if (key == "server_threads") {
      c.server_threads = read_count(v, key);
    } else if (key == "embedding") {
      parse_embedding(v, c.embedding);
    } else if (key == "generation") {
      parse_generation(v, c.generation);
    } else if (key == "pipeline_defaults") {
      c.pipeline_defaults = parse_pipeline_options(v);
    } else {
      invalid("unknown key " + key);
    }
  }
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    invalid(path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void apply_environment(AppConfig& c) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("TERMMAP_STORE")) c.store_path = *v;
  if (auto v = env("TERMMAP_INDEX")) c.index_path = *v;
  if (auto v = env("TERMMAP_HOST")) c.host = *v;
  if (auto v = env("TERMMAP_PORT")) {
    try {
      c.port = std::stoi(*v);
    } catch (const std::exception&) {
      invalid("TERMMAP_PORT is not a number");
    }
    if (c.port < 0 || c.port > 65535) invalid("TERMMAP_PORT must be in [0, 65535]");
  }
  if (auto v = env("TERMMAP_CORS_ORIGIN")) c.cors_origin = *v;
  if (auto v = env("TERMMAP_EMBEDDING_ENDPOINT")) {
    c.embedding.provider = "remote";
    c.embedding.remote.endpoint = *v;
  }
  if (auto v = env("TERMMAP_GENERATION_URL")) {
    c.generation.backend = "remote";
    c.generation.remote.base_url = *v;
  }
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingSettings& s) {
  if (s.provider == "remote") {
    auto remote = s.remote;
    if (remote.dimension == 0) remote.dimension = s.dimension;
    return std::make_unique<RemoteEmbeddingProvider>(std::move(remote));
  }
  return std::make_unique<HashEmbeddingProvider>(s.dimension, s.seed);
}

std::unique_ptr<GenerationBackend> make_generation_backend(const GenerationSettings& s) {
  if (s.backend == "remote") return std::make_unique<RemoteCompletionBackend>(s.remote);
  if (s.backend == "stub") {
    auto stub = std::make_unique<StubBackend>(s.stub_replies);
    stub->set_fallback(s.stub_fallback);
    return stub;
  }
  return nullptr;
}

}  // namespace termmap
