#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "termmap/config.hpp"
#include "termmap/pipeline.hpp"

namespace httplib {
class Server;
}

namespace termmap {

/// Everything a running service owns. Members are left unloaded / null when
/// the configuration does not provide them.
struct Service {
  ConceptStore store;
  VectorIndex index;
  std::unique_ptr<EmbeddingProvider> embedder;
  std::unique_ptr<GenerationBackend> backend;

  PipelineDeps deps() const;
};

/// Loads the configured store and index and constructs the providers.
/// Throws FormatError for unreadable files and DimensionMismatch when the
/// index and the embedding provider disagree.
Service load_service(const AppConfig& config);

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Request handlers, independent of the transport.
class ApiHandlers {
 public:
  ApiHandlers(PipelineDeps deps, PipelineOptions defaults)
      : deps_(deps), defaults_(std::move(defaults)) {}

  /// POST /api/pipeline
  HttpResponse pipeline(std::string_view body) const;
  /// GET /api/health
  HttpResponse health() const;
  /// GET /api/concepts/{id}
  HttpResponse concept_details(std::string_view id, DetailFlags flags) const;

  static constexpr std::size_t kMaxNameLength = 512;

 private:
  PipelineDeps deps_;
  PipelineOptions defaults_;
};

HttpResponse error_response(int status, std::string_view error, std::string_view detail);

class ApiServer {
 public:
  ApiServer(const AppConfig& config, PipelineDeps deps);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds (port 0 picks a free port), starts serving on a background
  /// thread and returns the bound port. Throws Error on bind failure.
  int start();
  /// Stops accepting connections and waits for in-flight requests.
  void stop();

  int port() const noexcept { return port_; }
  const std::string& host() const noexcept { return host_; }

 private:
  void install_routes();

  ApiHandlers handlers_;
  std::string host_;
  int requested_port_;
  int port_ = -1;
  std::string cors_origin_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace termmap
