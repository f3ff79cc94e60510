#pragma once

// Dual retrieval: a flat vector store of embedded chunks, and a graph store
// whose entities are knowledge graphs carrying (graph, edge, node) weights.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace nativeai::kb {

inline constexpr int kEmbeddingDim = 256;

using Embedding = std::vector<double>;
using Metadata = std::map<std::string, std::string>;

std::uint64_t fnv1a64(std::string_view bytes);

// Lowercased ASCII-alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);
bool is_stopword(std::string_view token);
std::vector<std::string> content_tokens(std::string_view text);

// Feature-hashed bag of words: bucket = fnv1a64(token) % D, sign from bit 63,
// then L2 normalization. Empty or whitespace-only text yields the zero vector.
Embedding embed(std::string_view text);

// Zero when either side is the zero vector.
double cosine(const Embedding& a, const Embedding& b);

// 16 hex digits of fnv1a64(text).
std::string content_hash(std::string_view text);

struct StoreOptions {
  int chunk_tokens = 256;
  double group_threshold = 0.8;
  double cosine_weight = 0.8;  // metadata match gets the remainder
  double path_edge_floor = 0.25;
  double cross_ref_saturation = 3.0;
};

// Paragraphs (blank-line separated) merged greedily while the running chunk
// stays within max_tokens whitespace tokens. Oversized paragraphs are split.
std::vector<std::string> chunk_text(std::string_view text, int max_tokens);

struct KnowledgeChunk {
  std::string chunk_id;
  std::string text;
  Metadata metadata;
  Embedding embedding;
};

KnowledgeChunk make_chunk(std::string text, Metadata metadata);

enum class Provenance { kVector, kGraphPath };
std::string provenance_name(Provenance p);

struct RetrievalResult {
  KnowledgeChunk chunk;
  double score = 0.0;   // rank key: w * cosine + (1 - w) * metadata match
  double cosine = 0.0;  // best cosine over the query set
  Provenance provenance = Provenance::kVector;
};

struct Document {
  std::string summary;
  std::string text;
  Metadata metadata;
};

// One file is one document. A first line starting with "SUMMARY:" supplies the
// summary; otherwise the first paragraph does.
Document parse_document(std::string_view file_text, Metadata metadata);

struct GraphNode {
  KnowledgeChunk chunk;  // node weight is chunk.embedding
};

struct KnowledgeGraph {
  Embedding graph_weight;
  std::vector<std::string> summaries;
  std::vector<GraphNode> nodes;
  std::map<std::pair<std::string, std::string>, double> edge_weights;  // key ordered (min id, max id)

  double edge_weight(const std::string& a, const std::string& b) const;
  std::vector<std::pair<std::string, std::string>> edges() const;
};

// Section labels a chunk defines through heading lines ("## 3.2 ...", "Section 4 ...", "§5 ...").
std::vector<std::string> defined_section_labels(std::string_view chunk_text);
// Inline references ("§3.2", "Section 4") that are not the chunk's own headings.
std::vector<std::string> section_mentions(std::string_view chunk_text);

std::vector<KnowledgeGraph> build_graph_store(const std::vector<Document>& documents,
                                              const StoreOptions& options = {});

struct GraphQueryResult {
  std::vector<RetrievalResult> results;
  std::size_t graph_index = 0;
  double match_score = 0.0;
  std::vector<std::string> matched_nodes;
};

// Throws Error(kEmptyGraphStore).
GraphQueryResult graph_query(const std::vector<KnowledgeGraph>& graphs, std::string_view original_query,
                             const std::vector<std::string>& expansions, std::size_t k,
                             const StoreOptions& options = {});

// Scripted rewriting through a synonym table plus templates. Every expansion
// keeps at least one content token of the query and differs from it.
std::vector<std::string> expand_query(std::string_view query, std::size_t n);

// Concatenate, keep the best-scoring copy of each chunk id, re-rank, truncate to k.
std::vector<RetrievalResult> merge_results(std::vector<RetrievalResult> a, const std::vector<RetrievalResult>& b,
                                           std::size_t k);

class KnowledgeStore {
 public:
  explicit KnowledgeStore(StoreOptions options = {}) : options_(options) {}

  // Chunk, embed, and store. Re-ingesting identical text is a no-op. Throws kEmptyDocument.
  std::vector<std::string> ingest_document(std::string_view text, const Metadata& metadata);

  // ingest_document plus registration for the graph store, which is rebuilt.
  std::vector<std::string> add_document(const Document& document);

  std::size_t size() const { return order_.size(); }
  bool empty() const { return order_.empty(); }
  const KnowledgeChunk* find(const std::string& chunk_id) const;
  std::vector<const KnowledgeChunk*> chunks() const;

  const std::vector<KnowledgeGraph>& graphs() const { return graphs_; }
  const std::vector<Document>& documents() const { return documents_; }
  const StoreOptions& options() const { return options_; }

  std::vector<RetrievalResult> retrieve(std::string_view original_query, const std::vector<std::string>& expansions,
                                        std::size_t k) const;
  GraphQueryResult graph_query(std::string_view original_query, const std::vector<std::string>& expansions,
                               std::size_t k) const;

  nlohmann::json to_json() const;
  static KnowledgeStore from_json(const nlohmann::json& j, StoreOptions options = {});
  void save(const std::string& path) const;
  static KnowledgeStore load(const std::string& path, StoreOptions options = {});

 private:
  StoreOptions options_;
  std::map<std::string, KnowledgeChunk> chunks_;
  std::vector<std::string> order_;
  std::vector<Document> documents_;
  std::vector<KnowledgeGraph> graphs_;
};

// Small built-in corpus describing the toolkit algorithms; used when no store file is given.
KnowledgeStore default_knowledge_store();

}  // namespace nativeai::kb
