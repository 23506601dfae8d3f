#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "termmap/embedding.hpp"
#include "termmap/events.hpp"
#include "termmap/llm_gateway.hpp"
#include "termmap/pipeline.hpp"

namespace termmap {

struct EmbeddingSettings {
  std::string provider = "test";  // "test" | "remote"
  std::size_t dimension = HashEmbeddingProvider::kDefaultDimension;
  std::uint64_t seed = HashEmbeddingProvider::kDefaultSeed;
  RemoteEmbeddingConfig remote;
};

struct GenerationSettings {
  std::string backend = "none";  // "remote" | "stub" | "none"
  RemoteCompletionConfig remote;
  std::vector<std::pair<std::string, std::string>> stub_replies;
  std::optional<std::string> stub_fallback;
};

/// Service configuration. See README for the file format; TERMMAP_*
/// environment variables override file values.
struct AppConfig {
  std::optional<std::filesystem::path> store_path;
  std::optional<std::filesystem::path> index_path;
  std::string host = "127.0.0.1";
  int port = 8000;
  std::string cors_origin = "*";
  std::size_t server_threads = 8;
  EmbeddingSettings embedding;
  GenerationSettings generation;
  PipelineOptions pipeline_defaults;
};

/// Throws ValidationError on unknown keys or bad values.
AppConfig config_from_json(const Json& j);
AppConfig load_config(const std::filesystem::path& path);

/// TERMMAP_STORE, TERMMAP_INDEX, TERMMAP_HOST, TERMMAP_PORT,
/// TERMMAP_CORS_ORIGIN, TERMMAP_EMBEDDING_ENDPOINT, TERMMAP_GENERATION_URL.
void apply_environment(AppConfig& config);

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingSettings& settings);
/// nullptr for backend "none".
std::unique_ptr<GenerationBackend> make_generation_backend(const GenerationSettings& settings);

}  // namespace termmap
