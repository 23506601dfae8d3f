#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace termmap {

using Embedding = std::vector<float>;

/// Maps text to unit-length vectors of a fixed dimension.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dimension() const = 0;

  /// Identifies the model/configuration; recorded in index headers.
  virtual std::string fingerprint() const = 0;

  /// One unit vector per input, in input order. Throws ProviderUnavailable
  /// on transport failure and InvalidInput for empty texts.
  virtual std::vector<Embedding> embed_batch(
      std::span<const std::string> texts) const = 0;

  Embedding embed(std::string_view text) const;
};

/// Scales `v` to unit Euclidean norm (accumulated in double). Throws
/// InvalidInput for a zero vector.
void normalize(std::span<float> v);

/// Deterministic test provider: a seeded random projection of hashed text
/// features. Needs no model and no network.
///
/// Features of a text T:
///   - every token of tokenize(T) as "w:<token>", weight 1.0
///   - every 3-byte window of " " + lowercase(T) + " " as "c:<window>",
///     weight 0.5
/// A feature key hashes to h = fnv1a64(key) ^ seed. Its contribution to
/// component j is weight * (2 * u(splitmix64(h + j * 0x9E3779B97F4A7C15)) - 1)
/// where u(x) = (x >> 11) * 2^-53. The summed vector is normalized in double
/// precision and stored as float.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  static constexpr std::uint64_t kDefaultSeed = 42;
  static constexpr std::size_t kDefaultDimension = 128;

  explicit HashEmbeddingProvider(std::size_t dimension = kDefaultDimension,
                                 std::uint64_t seed = kDefaultSeed);

  std::size_t dimension() const override { return dimension_; }
  std::string fingerprint() const override;
  std::vector<Embedding> embed_batch(
      std::span<const std::string> texts) const override;

 private:
  Embedding embed_one(std::string_view text) const;

  std::size_t dimension_;
  std::uint64_t seed_;
};

struct RemoteEmbeddingConfig {
  /// Full URL of the embedding endpoint, e.g. "http://127.0.0.1:8081/embed".
  std::string endpoint;
  std::size_t dimension = 0;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_connections = 4;
  std::size_t batch_size = 64;
  std::string model_name = "remote";
};

/// POSTs {"texts": [...]} and expects {"embeddings": [[...], ...]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

  std::size_t dimension() const override { return config_.dimension; }
  std::string fingerprint() const override;
  std::vector<Embedding> embed_batch(
      std::span<const std::string> texts) const override;

  const RemoteEmbeddingConfig& config() const noexcept { return config_; }

 private:
  std::vector<Embedding> post_batch(std::span<const std::string> texts) const;

  RemoteEmbeddingConfig config_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace termmap
