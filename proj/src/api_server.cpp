#include "termmap/api_server.hpp"

#include <charconv>

#include <httplib.h>

#include "termmap/error.hpp"
#include "termmap/text.hpp"

namespace termmap {

namespace {

std::size_t code_points(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::StoreUnavailable:
    case ErrorCode::BackendUnavailable:
    case ErrorCode::ProviderUnavailable:
      return 503;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::ValidationError:
    case ErrorCode::InvalidInput:
      return 422;
    default:
      return 500;
  }
}

HttpResponse from_error(const Error& e) {
  return error_response(status_for(e.code()), to_string(e.code()), e.what());
}

bool parse_flag(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return false;
  const auto v = to_lower_ascii(req.get_param_value(key));
  if (v == "true" || v == "1" || v.empty()) return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::ValidationError,
              std::string("query flag ") + key + " must be true or false");
}

}  // namespace

PipelineDeps Service::deps() const {
  PipelineDeps d;
  d.store = &store;
  d.index = &index;
  d.embedder = embedder.get();
  d.backend = backend.get();
  return d;
}

Service load_service(const AppConfig& config) {
  Service s;
  if (config.store_path) s.store = ConceptStore::load(*config.store_path);
  s.embedder = make_embedding_provider(config.embedding);
  if (config.index_path) {
    s.index = VectorIndex::load(*config.index_path);
    if (s.index.dimension() != s.embedder->dimension()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "index dimension " + std::to_string(s.index.dimension()) +
                      " does not match embedding provider dimension " +
                      std::to_string(s.embedder->dimension()));
    }
  }
  s.backend = make_generation_backend(config.generation);
  return s;
}

HttpResponse error_response(int status, std::string_view error, std::string_view detail) {
  Json j;
  j["error"] = error;
  j["detail"] = detail;
  return {status, j.dump()};
}

HttpResponse ApiHandlers::pipeline(std::string_view body) const {
  Json request;
  try {
    request = Json::parse(body);
  } catch (const Json::parse_error& e) {
    return error_response(400, "invalid_json", e.what());
  }
  if (!request.is_object()) {
    return error_response(422, "validation_error", "request body must be a JSON object");
  }
  for (const auto& [key, _] : request.items()) {
    if (key != "names" && key != "pipeline_options") {
      return error_response(422, "validation_error", "unknown request key \"" + key + "\"");
    }
  }

  const auto names_it = request.find("names");
  if (names_it == request.end() || !names_it->is_array()) {
    return error_response(422, "validation_error", "names must be an array of strings");
  }
  if (names_it->empty()) {
    return error_response(422, "validation_error", "names must not be empty");
  }
  std::vector<std::string> names;
  names.reserve(names_it->size());
  for (std::size_t i = 0; i < names_it->size(); ++i) {
    const auto& n = (*names_it)[i];
    if (!n.is_string()) {
      return error_response(422, "validation_error",
                            "names[" + std::to_string(i) + "] is not a string");
    }
    const auto trimmed = trim(n.get_ref<const std::string&>());
    if (trimmed.empty()) {
      return error_response(422, "validation_error",
                            "names[" + std::to_string(i) + "] is empty");
    }
    if (code_points(trimmed) > kMaxNameLength) {
      return error_response(422, "validation_error",
                            "names[" + std::to_string(i) + "] exceeds " +
                                std::to_string(kMaxNameLength) + " characters");
    }
    names.emplace_back(trimmed);
  }

  PipelineOptions options = defaults_;
  try {
    if (auto it = request.find("pipeline_options"); it != request.end() && !it->is_null()) {
      options = parse_pipeline_options(*it, defaults_);
    }
    const Pipeline pipeline(deps_);
    pipeline.require_ready(options.mode);
    const auto results = pipeline.run_batch(names, options);
    Json out = Json::array();
    for (const auto& r : results) out.push_back(to_json(r, options.report_timing));
    return {200, out.dump()};
  } catch (const Error& e) {
    return from_error(e);
  }
}

HttpResponse ApiHandlers::health() const {
  const bool store_loaded = deps_.store && deps_.store->loaded();
  const bool index_loaded = deps_.index && deps_.index->loaded();
  bool backend_reachable = false;
  if (deps_.backend) {
    try {
      backend_reachable = deps_.backend->reachable();
    } catch (const std::exception&) {
      backend_reachable = false;
    }
  }
  Json j;
  j["status"] = store_loaded && index_loaded && backend_reachable ? "ok" : "degraded";
  j["store_loaded"] = store_loaded;
  j["index_loaded"] = index_loaded;
  j["backend_reachable"] = backend_reachable;
  return {200, j.dump()};
}

HttpResponse ApiHandlers::concept_details(std::string_view id_text, DetailFlags flags) const {
  if (!deps_.store || !deps_.store->loaded()) {
    return error_response(503, "store_unavailable", "concept store is not loaded");
  }
  ConceptId id = 0;
  const auto* end = id_text.data() + id_text.size();
  const auto [ptr, ec] = std::from_chars(id_text.data(), end, id);
  if (ec != std::errc() || ptr != end) {
    return error_response(404, "not_found", "no concept with id " + std::string(id_text));
  }
  try {
    return {200, to_json(deps_.store->fetch_concept_details(id, flags)).dump()};
  } catch (const Error& e) {
    return from_error(e);
  }
}

ApiServer::ApiServer(const AppConfig& config, PipelineDeps deps)
    : handlers_(deps, config.pipeline_defaults),
      host_(config.host),
      requested_port_(config.port),
      cors_origin_(config.cors_origin),
      server_(std::make_unique<httplib::Server>()) {
  const auto threads = config.server_threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::install_routes() {
  auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };

  server_->Post("/api/pipeline", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handlers_.pipeline(req.body));
  });
  server_->Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handlers_.health());
  });
  server_->Get(R"(/api/concepts/([^/]+))",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 DetailFlags flags;
                 try {
                   flags.synonyms = parse_flag(req, "synonyms");
                   flags.ancestors = parse_flag(req, "ancestors");
                   flags.relationships = parse_flag(req, "relationships");
                 } catch (const Error& e) {
                   send(res, from_error(e));
                   return;
                 }
                 send(res, handlers_.concept_details(req.matches[1].str(), flags));
               });
  server_->Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Max-Age", "600");
  });

  server_->set_exception_handler(
      [send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string detail = "unknown error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          detail = e.what();
        } catch (...) {
        }
        send(res, error_response(500, "internal_error", detail));
      });
  server_->set_error_handler([send](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send(res, error_response(404, "not_found", "no route for " + req.method + " " + req.path));
    } else if (res.status == 413) {
      send(res, error_response(413, "payload_too_large", "request body too large"));
    } else {
      send(res, error_response(res.status, "http_error", httplib::status_message(res.status)));
    }
  });
  server_->set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
    if (!cors_origin_.empty()) res.set_header("Access-Control-Allow-Origin", cors_origin_);
  });
  server_->set_payload_max_length(16 * 1024 * 1024);
}

int ApiServer::start() {
  if (thread_.joinable()) return port_;
  if (requested_port_ == 0) {
    port_ = server_->bind_to_any_port(host_);
  } else {
    port_ = server_->bind_to_port(host_, requested_port_) ? requested_port_ : -1;
  }
  if (port_ < 0) {
    throw Error(ErrorCode::InvalidInput,
                "cannot bind " + host_ + ":" + std::to_string(requested_port_));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ApiServer::stop() {
  if (!thread_.joinable()) return;
  server_->stop();
  thread_.join();
}

}  // namespace termmap
