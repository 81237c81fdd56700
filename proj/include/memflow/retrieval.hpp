#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "memflow/memory_store.hpp"

namespace memflow {

struct RetrievalParams {
  double k1 = 1.5;
  double b = 0.75;
  double rrf_k = 60.0;
  std::size_t base_top_k = 8;
  std::size_t tier2_top_k = 20;
  std::size_t tier2_doc_top_k = 40;
  std::size_t tier3_top_k = 20;
  std::size_t tier3_broad_top_k = 80;
  std::size_t map_shard_turns = 5;
};

/// Dense text encoder. Implementations must be deterministic and thread-safe.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<float> embed(std::string_view text) const = 0;
  virtual std::vector<std::vector<float>> embed_batch(std::span<const std::string> texts) const;
};

/// Feature-hashed unigram term frequencies over non-stopword tokens,
/// L2-normalized. Offline stand-in for a sentence encoder.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 384) : dim_(dim) {}
  std::size_t dimension() const override { return dim_; }
  std::vector<float> embed(std::string_view text) const override;

 private:
  std::size_t dim_;
};

/// OpenAI-compatible /v1/embeddings client.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string endpoint, std::string model, std::size_t dim);
  std::size_t dimension() const override { return dim_; }
  std::vector<float> embed(std::string_view text) const override;
  std::vector<std::vector<float>> embed_batch(std::span<const std::string> texts) const override;

 private:
  std::string endpoint_;
  std::string model_;
  std::size_t dim_;
};

double cosine(std::span<const float> a, std::span<const float> b);

struct ScoredChunk {
  std::string chunk_id;
  double score = 0.0;
  std::vector<std::string> rank_sources;  // passes that contributed

  bool operator==(const ScoredChunk&) const = default;
};

/// Score descending, chunk_id ascending.
void sort_ranking(std::vector<ScoredChunk>& ranking);

/// Dense vectors persisted next to a store: little-endian
/// {count: u32, dim: u32} followed by count*dim f32, plus a sidecar file
/// with one chunk_id per line.
struct VectorCache {
  std::vector<std::string> chunk_ids;
  std::size_t dim = 0;
  std::vector<std::vector<float>> vectors;
};
void save_vector_cache(const VectorCache& cache, const std::filesystem::path& path);
VectorCache load_vector_cache(const std::filesystem::path& path);
std::filesystem::path vector_cache_ids_path(const std::filesystem::path& path);

/// Inverted index plus dense vectors. Immutable after build.
class HybridIndex {
 public:
  struct Posting {
    std::size_t doc = 0;
    std::size_t tf = 0;
  };

  HybridIndex() = default;

  /// Throws Error{IndexBuildError} on duplicate chunk ids or bad vectors.
  static HybridIndex build(std::vector<Chunk> chunks, const Embedder& embedder,
                           const VectorCache* cache = nullptr);

  std::size_t size() const { return chunks_.size(); }
  bool empty() const { return chunks_.empty(); }
  double avgdl() const { return avgdl_; }
  std::size_t dimension() const { return dim_; }
  std::size_t doc_length(std::size_t doc) const { return doc_len_.at(doc); }
  std::size_t document_frequency(std::string_view term) const;
  const std::vector<Posting>* postings(std::string_view term) const;

  const std::vector<Chunk>& chunks() const { return chunks_; }
  const std::vector<std::vector<float>>& vectors() const { return vectors_; }
  const Chunk* find(std::string_view chunk_id) const;
  /// Throws std::out_of_range for unknown ids.
  const Chunk& chunk(std::string_view chunk_id) const;

  VectorCache export_vectors() const;

 private:
  std::vector<Chunk> chunks_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::unordered_map<std::string, std::vector<Posting>> inverted_;
  std::vector<std::size_t> doc_len_;
  double avgdl_ = 0.0;
  std::vector<std::vector<float>> vectors_;
  std::size_t dim_ = 0;
};

/// Okapi BM25 with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)) summed over the
/// distinct query terms. Zero-score documents are excluded.
std::vector<ScoredChunk> bm25_rank(const HybridIndex& index, std::string_view query,
                                   const RetrievalParams& params = {});

/// Cosine similarity against every stored vector, positive scores only. A
/// zero query vector yields an empty ranking. Throws Error{EmbedderError} on
/// dimension mismatch.
std::vector<ScoredChunk> dense_rank(const HybridIndex& index, std::string_view query, const Embedder& embedder);

/// fused(d) = sum over rankings containing d of 1 / (rrf_k + rank), rank 1-based.
std::vector<ScoredChunk> rrf_fuse(std::span<const std::vector<std::string>> rankings, double rrf_k);

/// One hybrid pass: BM25 and dense rankings fused by RRF, truncated to top_k.
std::vector<ScoredChunk> hybrid_rank(const HybridIndex& index, std::string_view query, std::size_t top_k,
                                     const Embedder& embedder, const RetrievalParams& params,
                                     const std::string& source = "primary");

enum class AnchorKind { Name, Quoted, NumericDate, NounPhrase, Event };
std::string_view to_string(AnchorKind kind);

struct Anchor {
  std::string text;
  AnchorKind kind = AnchorKind::Name;
  std::size_t position = 0;  // byte offset in the query

  bool operator==(const Anchor&) const = default;
};

/// Capitalized name spans, quoted strings, date and numeric expressions and
/// noun phrases after possessive markers; stopword-only anchors dropped,
/// deduplicated case-insensitively, ordered by position.
std::vector<Anchor> extract_anchors(std::string_view query);

/// The two highest-scoring clause spans of a temporal question, scored by
/// how many content terms (plus date expressions) they carry. Ties go to the
/// earlier span. Returned in query order.
std::vector<Anchor> event_anchors(std::string_view query);

/// Merge by chunk id keeping the maximum score and the union of sources.
std::vector<ScoredChunk> merge_max(std::vector<std::vector<ScoredChunk>> passes);

std::vector<ScoredChunk> multipass_retrieve(const HybridIndex& index, std::string_view query, std::size_t top_k,
                                            const Embedder& embedder, const RetrievalParams& params = {});

std::vector<ScoredChunk> dual_anchor_retrieve(const HybridIndex& index, std::string_view query,
                                              const Embedder& embedder, const RetrievalParams& params = {});

}  // namespace memflow
