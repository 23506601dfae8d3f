#include "termmap/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "binary_io.hpp"

namespace termmap {

namespace {

constexpr char kIndexMagic[8] = {'T', 'M', 'V', 'I', 'N', 'D', 'E', 'X'};
constexpr std::uint32_t kIndexVersion = 1;
constexpr double kUnitTolerance = 1e-6;

double dot(std::span<const float> a, std::span<const float> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

void check_unit(std::span<const float> v, ConceptId id) {
  const double norm = std::sqrt(dot(v, v));
  if (std::abs(norm - 1.0) > kUnitTolerance) {
    throw Error(ErrorCode::InvalidInput,
                "vector for concept " + std::to_string(id) +
                    " is not unit length (norm " + std::to_string(norm) + ")");
  }
}

}  // namespace

VectorIndex VectorIndex::build(std::vector<Concept> concepts,
                               const EmbeddingProvider& provider,
                               std::size_t batch_size) {
  if (concepts.empty()) {
    throw Error(ErrorCode::InvalidInput, "cannot build an index over zero concepts");
  }
  if (batch_size == 0) batch_size = 1;
  std::sort(concepts.begin(), concepts.end(),
            [](const Concept& a, const Concept& b) {
              return a.concept_id < b.concept_id;
            });

  VectorIndex index;
  index.dimension_ = provider.dimension();
  index.fingerprint_ = provider.fingerprint();
  index.ids_.reserve(concepts.size());
  index.names_.reserve(concepts.size());
  index.matrix_.reserve(concepts.size() * index.dimension_);

  std::vector<std::string> texts;
  for (std::size_t start = 0; start < concepts.size(); start += batch_size) {
    const auto end = std::min(concepts.size(), start + batch_size);
    texts.clear();
    for (auto i = start; i < end; ++i) texts.push_back(concepts[i].concept_name);

    std::vector<Embedding> vectors;
    try {
      vectors = provider.embed_batch(texts);
    } catch (const Error& e) {
      throw BuildError("index build failed after " + std::to_string(start) +
                           " records: " + e.what(),
                       start);
    }
    for (auto i = start; i < end; ++i) {
      const auto& v = vectors[i - start];
      if (v.size() != index.dimension_) {
        throw BuildError("provider returned wrong dimension", i);
      }
      if (i > 0 && concepts[i].concept_id == concepts[i - 1].concept_id) {
        throw Error(ErrorCode::InvalidInput,
                    "duplicate concept_id " + std::to_string(concepts[i].concept_id));
      }
      index.ids_.push_back(concepts[i].concept_id);
      index.names_.push_back(concepts[i].concept_name);
      index.matrix_.insert(index.matrix_.end(), v.begin(), v.end());
    }
  }
  return index;
}

VectorIndex VectorIndex::from_records(std::vector<EmbeddingRecord> records,
                                      std::vector<std::string> names,
                                      std::string fingerprint) {
  if (records.empty()) {
    throw Error(ErrorCode::InvalidInput, "cannot build an index over zero records");
  }
  if (names.size() != records.size()) {
    throw Error(ErrorCode::InvalidInput, "one name per record is required");
  }
  std::unordered_set<ConceptId> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.concept_id).second) {
      throw Error(ErrorCode::InvalidInput,
                  "duplicate concept_id " + std::to_string(r.concept_id));
    }
  }
  VectorIndex index;
  index.dimension_ = records.front().vector.size();
  index.fingerprint_ = std::move(fingerprint);
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    if (r.vector.size() != index.dimension_ || index.dimension_ == 0) {
      throw Error(ErrorCode::DimensionMismatch,
                  "record dimensions differ within one index");
    }
    check_unit(r.vector, r.concept_id);
    index.ids_.push_back(r.concept_id);
    index.names_.push_back(std::move(names[i]));
    index.matrix_.insert(index.matrix_.end(), r.vector.begin(), r.vector.end());
  }
  return index;
}

std::span<const float> VectorIndex::vector_at(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("vector index position");
  return {matrix_.data() + i * dimension_, dimension_};
}

std::vector<VectorHit> VectorIndex::search(std::span<const float> query,
                                           std::size_t k) const {
  if (!loaded() || size() == 0) {
    throw Error(ErrorCode::StoreUnavailable, "vector index is not loaded");
  }
  if (k == 0) throw Error(ErrorCode::InvalidInput, "k must be at least 1");
  if (query.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dimension " + std::to_string(query.size()) +
                    " does not match index dimension " + std::to_string(dimension_));
  }

  struct Scored {
    double score;
    std::size_t pos;
  };
  auto better = [this](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return ids_[a.pos] < ids_[b.pos];
  };

  const auto keep = std::min(k, size());
  std::vector<Scored> heap;  // worst of the kept hits at the front
  heap.reserve(keep + 1);
  for (std::size_t i = 0; i < size(); ++i) {
    const double s = std::clamp(dot(query, vector_at(i)), -1.0, 1.0);
    Scored cand{s, i};
    if (heap.size() < keep) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), better);
    } else if (better(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), better);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), better);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), better);

  std::vector<VectorHit> hits;
  hits.reserve(heap.size());
  for (const auto& h : heap) hits.push_back({ids_[h.pos], names_[h.pos], h.score});
  return hits;
}

std::vector<VectorHit> VectorIndex::query_top_k(std::string_view text,
                                                std::size_t k,
                                                const EmbeddingProvider& provider) const {
  if (provider.dimension() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch,
                "provider dimension " + std::to_string(provider.dimension()) +
                    " does not match index dimension " + std::to_string(dimension_));
  }
  const auto query = provider.embed(text);
  return search(query, k);
}

// File layout (little-endian):
//   magic "TMVINDEX" | u32 version | u32 dimension | u64 count |
//   str provider fingerprint |
//   count x (i64 concept_id, str concept_name) |
//   count x dimension f32 (row-major)
void VectorIndex::save(const std::filesystem::path& path) const {
  if (!loaded()) throw Error(ErrorCode::StoreUnavailable, "index is empty");
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::BuildFailed, "cannot write index file " + tmp);
    detail::BinaryWriter w(out);
    w.put_raw(kIndexMagic, sizeof kIndexMagic);
    w.put(kIndexVersion);
    w.put(static_cast<std::uint32_t>(dimension_));
    w.put(static_cast<std::uint64_t>(size()));
    w.put_string(fingerprint_);
    for (std::size_t i = 0; i < size(); ++i) {
      w.put(ids_[i]);
      w.put_string(names_[i]);
    }
    w.put_raw(matrix_.data(), matrix_.size() * sizeof(float));
    if (!out.flush()) {
      throw Error(ErrorCode::BuildFailed, "failed writing index file " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::StoreUnavailable,
                "cannot open index file " + path.string());
  }
  detail::BinaryReader r(in, "index file " + path.string());
  char magic[sizeof kIndexMagic];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kIndexMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::FormatError, path.string() + " is not an index file");
  }
  if (const auto v = r.get<std::uint32_t>(); v != kIndexVersion) {
    throw Error(ErrorCode::FormatError,
                "unsupported index version " + std::to_string(v));
  }
  VectorIndex index;
  index.dimension_ = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  index.fingerprint_ = r.get_string();
  if (index.dimension_ == 0 || count == 0) {
    throw Error(ErrorCode::FormatError, "index file has no records");
  }
  index.ids_.resize(count);
  index.names_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    index.ids_[i] = r.get<std::int64_t>();
    index.names_[i] = r.get_string();
  }
  index.matrix_.resize(count * index.dimension_);
  r.read(index.matrix_.data(), index.matrix_.size() * sizeof(float));
  return index;
}

std::vector<VectorHit> exceeds_exact_threshold(const std::vector<VectorHit>& hits,
                                               double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, "exact-match threshold must be in (0, 1]");
  }
  std::vector<VectorHit> out;
  std::copy_if(hits.begin(), hits.end(), std::back_inserter(out),
               [threshold](const VectorHit& h) { return h.score >= threshold; });
  return out;
}

}  // namespace termmap
