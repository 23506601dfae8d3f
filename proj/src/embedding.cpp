#include "termmap/embedding.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "http_util.hpp"
#include "termmap/error.hpp"
#include "termmap/text.hpp"

namespace termmap {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void require_text(std::string_view text) {
  if (text.empty()) {
    throw Error(ErrorCode::InvalidInput, "cannot embed an empty string");
  }
}

}  // namespace

Embedding EmbeddingProvider::embed(std::string_view text) const {
  require_text(text);
  std::string owned(text);
  auto batch = embed_batch(std::span<const std::string>(&owned, 1));
  return std::move(batch.front());
}

void normalize(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) {
    throw Error(ErrorCode::InvalidInput, "cannot normalize a zero or non-finite vector");
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dimension,
                                             std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension == 0) {
    throw Error(ErrorCode::InvalidInput, "embedding dimension must be positive");
  }
}

std::string HashEmbeddingProvider::fingerprint() const {
  return "hash-v1:dim=" + std::to_string(dimension_) +
         ":seed=" + std::to_string(seed_);
}

std::vector<Embedding> HashEmbeddingProvider::embed_batch(
    std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

Embedding HashEmbeddingProvider::embed_one(std::string_view text) const {
  require_text(text);
  std::vector<double> acc(dimension_, 0.0);
  auto add_feature = [&](std::string_view key, double weight) {
    const std::uint64_t h = fnv1a64(key) ^ seed_;
    for (std::size_t j = 0; j < dimension_; ++j) {
      const std::uint64_t r = splitmix64(h + j * kGolden);
      const double u = static_cast<double>(r >> 11) * 0x1.0p-53;
      acc[j] += weight * (2.0 * u - 1.0);
    }
  };

  for (const auto& token : tokenize(text)) add_feature("w:" + token, 1.0);
  const std::string padded = " " + to_lower_ascii(text) + " ";
  std::string key = "c:";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    key.resize(2);
    key.append(padded, i, 3);
    add_feature(key, 0.5);
  }

  double sq = 0.0;
  for (double x : acc) sq += x * x;
  if (!(sq > 0.0)) {
    throw Error(ErrorCode::InvalidInput, "degenerate embedding for \"" +
                                             std::string(text) + "\"");
  }
  const double inv = 1.0 / std::sqrt(sq);
  Embedding v(dimension_);
  for (std::size_t j = 0; j < dimension_; ++j) {
    v[j] = static_cast<float>(acc[j] * inv);
  }
  return v;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config)
    : config_(std::move(config)) {
  if (config_.endpoint.empty()) {
    throw Error(ErrorCode::InvalidInput, "remote embedding endpoint is not set");
  }
  if (config_.dimension == 0) {
    throw Error(ErrorCode::InvalidInput,
                "remote embedding dimension must be configured");
  }
  if (config_.max_connections == 0) config_.max_connections = 1;
  if (config_.batch_size == 0) config_.batch_size = 1;
  slots_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(config_.max_connections));
}

std::string RemoteEmbeddingProvider::fingerprint() const {
  return "remote:" + config_.model_name +
         ":dim=" + std::to_string(config_.dimension);
}

std::vector<Embedding> RemoteEmbeddingProvider::embed_batch(
    std::span<const std::string> texts) const {
  for (const auto& t : texts) require_text(t);
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); i += config_.batch_size) {
    const auto n = std::min(config_.batch_size, texts.size() - i);
    auto part = post_batch(texts.subspan(i, n));
    for (auto& v : part) out.push_back(std::move(v));
  }
  return out;
}

std::vector<Embedding> RemoteEmbeddingProvider::post_batch(
    std::span<const std::string> texts) const {
  const auto url = detail::split_url(config_.endpoint, ErrorCode::ProviderUnavailable);
  nlohmann::json body;
  body["texts"] = std::vector<std::string>(texts.begin(), texts.end());

  httplib::Result res;
  {
    detail::SlotGuard slot(*slots_);
    httplib::Client client(url.origin);
    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    res = client.Post(url.path, body.dump(), "application/json");
  }

  if (!res) {
    throw Error(ErrorCode::ProviderUnavailable,
                "embedding endpoint " + config_.endpoint +
                    " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::ProviderUnavailable,
                "embedding endpoint returned HTTP " + std::to_string(res->status));
  }

  std::vector<Embedding> out;
  try {
    const auto parsed = nlohmann::json::parse(res->body);
    for (const auto& row : parsed.at("embeddings")) {
      out.push_back(row.get<Embedding>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable,
                std::string("malformed embedding response: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw Error(ErrorCode::ProviderUnavailable,
                "embedding endpoint returned " + std::to_string(out.size()) +
                    " vectors for " + std::to_string(texts.size()) + " texts");
  }
  for (auto& v : out) {
    if (v.size() != config_.dimension) {
      throw Error(ErrorCode::DimensionMismatch,
                  "embedding endpoint returned dimension " +
                      std::to_string(v.size()) + ", expected " +
                      std::to_string(config_.dimension));
    }
    normalize(v);
  }
  return out;
}

}  // namespace termmap
