#include "termmap/concept_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "binary_io.hpp"
#include "termmap/error.hpp"

namespace termmap {

namespace {

constexpr char kStoreMagic[8] = {'T', 'M', 'S', 'T', 'O', 'R', 'E', '\0'};
constexpr std::uint32_t kStoreVersion = 1;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  std::int64_t value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::optional<ConceptId> parse_id(std::string_view s) {
  auto v = parse_int(s);
  if (!v || *v <= 0) return std::nullopt;
  return v;
}

/// Reads a header-first TSV file, resolving the named columns. Calls
/// `on_row` with the field values in `columns` order for every row that has
/// enough fields; short rows bump `skipped`.
template <typename OnRow>
void read_tsv(const std::filesystem::path& path,
              const std::vector<std::string_view>& columns, std::size_t& skipped,
              OnRow&& on_row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IngestError,
                "cannot open vocabulary file " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::IngestError,
                "vocabulary file has no header row: " + path.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  const auto header = split_tabs(line);
  std::vector<std::size_t> positions;
  for (auto column : columns) {
    auto it = std::find_if(header.begin(), header.end(), [&](auto h) {
      return to_lower_ascii(trim(h)) == column;
    });
    if (it == header.end()) {
      throw Error(ErrorCode::IngestError,
                  "missing required column '" + std::string(column) + "' in " +
                      path.string());
    }
    positions.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  const auto needed = *std::max_element(positions.begin(), positions.end()) + 1;

  std::vector<std::string_view> picked(columns.size());
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < needed) {
      ++skipped;
      continue;
    }
    for (std::size_t i = 0; i < positions.size(); ++i) {
      picked[i] = fields[positions[i]];
    }
    on_row(picked);
  }
}

void insert_sorted(std::vector<std::uint32_t>& postings, std::uint32_t pos) {
  auto it = std::lower_bound(postings.begin(), postings.end(), pos);
  if (it == postings.end() || *it != pos) postings.insert(it, pos);
}

}  // namespace

ConceptStore ConceptStore::from_concepts(std::vector<Concept> concepts) {
  ConceptStore store;
  std::sort(concepts.begin(), concepts.end(),
            [](const Concept& a, const Concept& b) {
              return a.concept_id < b.concept_id;
            });
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    const auto& c = concepts[i];
    if (c.concept_id <= 0) {
      throw Error(ErrorCode::InvalidInput,
                  "concept_id must be positive: " + std::to_string(c.concept_id));
    }
    if (trim(c.concept_name).empty()) {
      throw Error(ErrorCode::InvalidInput,
                  "empty concept_name for concept " + std::to_string(c.concept_id));
    }
    if (i > 0 && concepts[i - 1].concept_id == c.concept_id) {
      throw Error(ErrorCode::InvalidInput,
                  "duplicate concept_id " + std::to_string(c.concept_id));
    }
  }
  store.concepts_ = std::move(concepts);
  store.synonyms_.resize(store.concepts_.size());
  store.ancestors_.resize(store.concepts_.size());
  store.relationships_.resize(store.concepts_.size());
  store.rebuild_index();
  store.loaded_ = true;
  return store;
}

ConceptStore ConceptStore::from_files(const VocabularyFiles& files,
                                      IngestStats* stats) {
  IngestStats local;
  std::vector<Concept> concepts;
  std::unordered_set<ConceptId> seen;

  read_tsv(files.concepts,
           {"concept_id", "concept_name", "vocabulary_id", "concept_code",
            "domain_id", "standard_concept"},
           local.skipped, [&](const std::vector<std::string_view>& f) {
             const auto id = parse_id(f[0]);
             const auto name = trim(f[1]);
             if (!id || name.empty() || !seen.insert(*id).second) {
               ++local.skipped;
               return;
             }
             Concept c;
             c.concept_id = *id;
             c.concept_name = std::string(name);
             c.vocabulary_id = std::string(trim(f[2]));
             c.concept_code = std::string(trim(f[3]));
             c.domain_id = std::string(trim(f[4]));
             const auto flag = trim(f[5]);
             if (!flag.empty()) c.standard_concept = flag.front();
             concepts.push_back(std::move(c));
           });

  ConceptStore store = from_concepts(std::move(concepts));
  local.concepts = store.size();

  if (files.synonyms) {
    read_tsv(*files.synonyms, {"concept_id", "concept_synonym_name"},
             local.skipped, [&](const std::vector<std::string_view>& f) {
               const auto id = parse_id(f[0]);
               const auto name = trim(f[1]);
               if (!id || name.empty() || !store.find(*id)) {
                 ++local.skipped;
                 return;
               }
               store.synonyms_[store.index_of(*id)].emplace_back(name);
               ++local.synonyms;
             });
  }
  if (files.ancestors) {
    read_tsv(*files.ancestors,
             {"ancestor_concept_id", "descendant_concept_id",
              "min_levels_of_separation"},
             local.skipped, [&](const std::vector<std::string_view>& f) {
               const auto ancestor = parse_id(f[0]);
               const auto descendant = parse_id(f[1]);
               const auto levels = parse_int(f[2]);
               if (!ancestor || !descendant || !levels || *levels < 0 ||
                   !store.find(*descendant)) {
                 ++local.skipped;
                 return;
               }
               store.ancestors_[store.index_of(*descendant)].push_back(
                   {*ancestor, static_cast<int>(*levels)});
               ++local.ancestors;
             });
  }
  if (files.relationships) {
    read_tsv(*files.relationships,
             {"concept_id_1", "concept_id_2", "relationship_id"}, local.skipped,
             [&](const std::vector<std::string_view>& f) {
               const auto from = parse_id(f[0]);
               const auto to = parse_id(f[1]);
               const auto rel = trim(f[2]);
               if (!from || !to || rel.empty() || !store.find(*from)) {
                 ++local.skipped;
                 return;
               }
               store.relationships_[store.index_of(*from)].push_back(
                   {std::string(rel), *to});
               ++local.relationships;
             });
  }
  store.rebuild_index();
  if (stats) *stats = local;
  return store;
}

void ConceptStore::rebuild_index() {
  name_postings_.clear();
  synonym_postings_.clear();
  by_id_.clear();
  by_id_.reserve(concepts_.size());
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    const auto pos = static_cast<std::uint32_t>(i);
    by_id_.emplace(concepts_[i].concept_id, i);
    // Positions are visited in ascending order, so a back() check dedupes.
    for (auto& token : tokenize(concepts_[i].concept_name)) {
      auto& list = name_postings_[std::move(token)];
      if (list.empty() || list.back() != pos) list.push_back(pos);
    }
    for (const auto& syn : synonyms_[i]) {
      for (auto& token : tokenize(syn)) {
        auto& list = synonym_postings_[std::move(token)];
        if (list.empty() || list.back() != pos) list.push_back(pos);
      }
    }
  }
}

void ConceptStore::require_loaded() const {
  if (!loaded_) {
    throw Error(ErrorCode::StoreUnavailable, "concept store is not loaded");
  }
}

std::size_t ConceptStore::index_of(ConceptId id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) {
    throw Error(ErrorCode::NotFound, "unknown concept_id " + std::to_string(id));
  }
  return it->second;
}

const Concept* ConceptStore::find(ConceptId id) const noexcept {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &concepts_[it->second];
}

const std::vector<std::string>& ConceptStore::synonyms_of(ConceptId id) const {
  require_loaded();
  return synonyms_[index_of(id)];
}

void ConceptStore::add_synonym(ConceptId id, std::string name) {
  require_loaded();
  const auto i = index_of(id);
  for (auto& token : tokenize(name)) {
    insert_sorted(synonym_postings_[std::move(token)],
                  static_cast<std::uint32_t>(i));
  }
  synonyms_[i].push_back(std::move(name));
}

void ConceptStore::add_ancestor(ConceptId descendant, AncestorLink link) {
  require_loaded();
  ancestors_[index_of(descendant)].push_back(link);
}

void ConceptStore::add_relationship(ConceptId id, RelationshipLink link) {
  require_loaded();
  relationships_[index_of(id)].push_back(std::move(link));
}

std::vector<Concept> ConceptStore::text_search(const SearchQuery& query,
                                               std::size_t limit) const {
  require_loaded();
  if (query.terms.empty()) {
    throw Error(ErrorCode::EmptyQuery, "text_search needs at least one term");
  }
  const auto n = concepts_.size();
  std::vector<std::uint32_t> counts(n, 0);
  std::vector<std::uint32_t> stamp(n, 0);
  std::vector<std::uint32_t> touched;

  auto visit = [&](const auto& postings_map, const std::string& term,
                   std::uint32_t term_no) {
    auto it = postings_map.find(term);
    if (it == postings_map.end()) return;
    for (const auto pos : it->second) {
      if (stamp[pos] == term_no) continue;
      stamp[pos] = term_no;
      if (counts[pos]++ == 0) touched.push_back(pos);
    }
  };

  for (std::size_t t = 0; t < query.terms.size(); ++t) {
    const auto term_no = static_cast<std::uint32_t>(t + 1);
    visit(name_postings_, query.terms[t], term_no);
    if (query.include_synonyms) visit(synonym_postings_, query.terms[t], term_no);
  }

  if (query.vocabulary_filter) {
    const auto& allowed = *query.vocabulary_filter;
    std::erase_if(touched, [&](std::uint32_t pos) {
      return std::find(allowed.begin(), allowed.end(),
                       concepts_[pos].vocabulary_id) == allowed.end();
    });
  }

  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;  // positions follow concept_id order
  };
  const auto keep = std::min(limit, touched.size());
  std::partial_sort(touched.begin(), touched.begin() + keep, touched.end(),
                    better);

  std::vector<Concept> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(concepts_[touched[i]]);
  return out;
}

ConceptDetails ConceptStore::fetch_concept_details(ConceptId id,
                                                   DetailFlags flags) const {
  require_loaded();
  const auto i = index_of(id);
  ConceptDetails details;
  details.entry = concepts_[i];
  if (flags.synonyms) details.synonyms = synonyms_[i];
  if (flags.ancestors) details.ancestors = ancestors_[i];
  if (flags.relationships) details.relationships = relationships_[i];
  return details;
}

// File layout (little-endian):
//   magic "TMSTORE\0" | u32 version | u64 concept count
//   per concept: i64 id, str name, str vocabulary, str code, str domain,
//                u8 standard_concept (0 = absent)
//   u64 synonym rows:      i64 id, str name
//   u64 ancestor rows:     i64 descendant, i64 ancestor, i32 levels
//   u64 relationship rows: i64 id_1, str relationship_id, i64 id_2
// where str = u32 byte length + UTF-8 bytes.
void ConceptStore::save(const std::filesystem::path& path) const {
  require_loaded();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::IngestError, "cannot write store file " + tmp);
    }
    detail::BinaryWriter w(out);
    w.put_raw(kStoreMagic, sizeof kStoreMagic);
    w.put(kStoreVersion);
    w.put(static_cast<std::uint64_t>(concepts_.size()));
    for (const auto& c : concepts_) {
      w.put(c.concept_id);
      w.put_string(c.concept_name);
      w.put_string(c.vocabulary_id);
      w.put_string(c.concept_code);
      w.put_string(c.domain_id);
      w.put(static_cast<std::uint8_t>(c.standard_concept.value_or('\0')));
    }
    auto count = [](const auto& table) {
      return std::accumulate(table.begin(), table.end(), std::uint64_t{0},
                             [](std::uint64_t acc, const auto& v) {
                               return acc + v.size();
                             });
    };
    w.put(count(synonyms_));
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
      for (const auto& s : synonyms_[i]) {
        w.put(concepts_[i].concept_id);
        w.put_string(s);
      }
    }
    w.put(count(ancestors_));
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
      for (const auto& a : ancestors_[i]) {
        w.put(concepts_[i].concept_id);
        w.put(a.ancestor_concept_id);
        w.put(static_cast<std::int32_t>(a.levels_of_separation));
      }
    }
    w.put(count(relationships_));
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
      for (const auto& r : relationships_[i]) {
        w.put(concepts_[i].concept_id);
        w.put_string(r.relationship_id);
        w.put(r.concept_id_2);
      }
    }
    if (!out.flush()) {
      throw Error(ErrorCode::IngestError, "failed writing store file " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

ConceptStore ConceptStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::StoreUnavailable,
                "cannot open store file " + path.string());
  }
  detail::BinaryReader r(in, "store file " + path.string());
  char magic[sizeof kStoreMagic];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kStoreMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::FormatError, path.string() + " is not a store file");
  }
  if (const auto v = r.get<std::uint32_t>(); v != kStoreVersion) {
    throw Error(ErrorCode::FormatError,
                "unsupported store version " + std::to_string(v));
  }
  std::vector<Concept> concepts(r.get<std::uint64_t>());
  for (auto& c : concepts) {
    c.concept_id = r.get<std::int64_t>();
    c.concept_name = r.get_string();
    c.vocabulary_id = r.get_string();
    c.concept_code = r.get_string();
    c.domain_id = r.get_string();
    if (const auto flag = r.get<std::uint8_t>(); flag != 0) {
      c.standard_concept = static_cast<char>(flag);
    }
  }
  ConceptStore store = from_concepts(std::move(concepts));
  for (auto n = r.get<std::uint64_t>(); n > 0; --n) {
    const auto id = r.get<std::int64_t>();
    store.synonyms_[store.index_of(id)].push_back(r.get_string());
  }
  for (auto n = r.get<std::uint64_t>(); n > 0; --n) {
    const auto id = r.get<std::int64_t>();
    AncestorLink link;
    link.ancestor_concept_id = r.get<std::int64_t>();
    link.levels_of_separation = r.get<std::int32_t>();
    store.ancestors_[store.index_of(id)].push_back(link);
  }
  for (auto n = r.get<std::uint64_t>(); n > 0; --n) {
    const auto id = r.get<std::int64_t>();
    RelationshipLink link;
    link.relationship_id = r.get_string();
    link.concept_id_2 = r.get<std::int64_t>();
    store.relationships_[store.index_of(id)].push_back(std::move(link));
  }
  store.rebuild_index();
  return store;
}

IngestStats ingest_vocabulary(const VocabularyFiles& files,
                              const std::filesystem::path& store_path) {
  IngestStats stats;
  const auto store = ConceptStore::from_files(files, &stats);
  store.save(store_path);
  return stats;
}

}  // namespace termmap
