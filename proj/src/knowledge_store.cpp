#include "nativeai/knowledge_store.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <regex>
#include <set>
#include <sstream>

#include "nativeai/error.hpp"

namespace nativeai::kb {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

bool is_stopword(std::string_view token) {
  static const std::set<std::string, std::less<>> stopwords = {
      "a",  "an",   "the",  "for", "of",   "to",   "in",     "on",   "and", "or",   "with", "by",
      "is", "are",  "be",   "how", "what", "please", "my",   "our",  "me",  "i",    "we",   "at",
      "as", "from", "this", "that", "it",  "its",  "can",    "do",   "does", "into", "via",  "per"};
  return stopwords.contains(token);
}

std::vector<std::string> content_tokens(std::string_view text) {
  auto tokens = tokenize(text);
  std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
  return tokens;
}

Embedding embed(std::string_view text) {
  Embedding v(kEmbeddingDim, 0.0);
  for (const auto& token : tokenize(text)) {
    const auto h = fnv1a64(token);
    const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
    v[h % kEmbeddingDim] += sign;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

double cosine(const Embedding& a, const Embedding& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::string content_hash(std::string_view text) {
  static constexpr char kHex[] = "0123456789abcdef";
  auto h = fnv1a64(text);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

namespace {

std::vector<std::string> split_paragraphs(std::string_view text) {
  std::vector<std::string> paragraphs;
  std::istringstream in{std::string(text)};
  std::string line, current;
  auto flush = [&] {
    if (!current.empty()) paragraphs.push_back(std::move(current));
    current.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
    } else {
      if (!current.empty()) current.push_back('\n');
      current += line;
    }
  }
  flush();
  return paragraphs;
}

std::size_t whitespace_tokens(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

}  // namespace

std::vector<std::string> chunk_text(std::string_view text, int max_tokens) {
  const auto limit = static_cast<std::size_t>(std::max(1, max_tokens));
  std::vector<std::string> chunks;
  std::string current;
  std::size_t current_tokens = 0;
  auto flush = [&] {
    if (!current.empty()) chunks.push_back(std::move(current));
    current.clear();
    current_tokens = 0;
  };

  for (const auto& paragraph : split_paragraphs(text)) {
    const auto n = whitespace_tokens(paragraph);
    if (n > limit) {
      flush();
      std::istringstream in(paragraph);
      std::string word, piece;
      std::size_t count = 0;
      while (in >> word) {
        if (!piece.empty()) piece.push_back(' ');
        piece += word;
        if (++count == limit) {
          chunks.push_back(std::move(piece));
          piece.clear();
          count = 0;
        }
      }
      if (!piece.empty()) chunks.push_back(std::move(piece));
      continue;
    }
    if (current_tokens + n > limit) flush();
    if (!current.empty()) current += "\n\n";
    current += paragraph;
    current_tokens += n;
  }
  flush();
  return chunks;
}

KnowledgeChunk make_chunk(std::string text, Metadata metadata) {
  KnowledgeChunk c;
  c.chunk_id = content_hash(text);
  c.embedding = embed(text);
  c.text = std::move(text);
  c.metadata = std::move(metadata);
  return c;
}

std::string provenance_name(Provenance p) { return p == Provenance::kVector ? "vector" : "graph-path"; }

Document parse_document(std::string_view file_text, Metadata metadata) {
  Document doc;
  doc.metadata = std::move(metadata);
  const std::string_view prefix = "SUMMARY:";
  if (file_text.starts_with(prefix)) {
    const auto eol = file_text.find('\n');
    auto summary = std::string(file_text.substr(prefix.size(), eol == std::string_view::npos ? eol : eol - prefix.size()));
    const auto first = summary.find_first_not_of(" \t");
    const auto last = summary.find_last_not_of(" \t\r");
    doc.summary = first == std::string::npos ? "" : summary.substr(first, last - first + 1);
    doc.text = eol == std::string_view::npos ? "" : std::string(file_text.substr(eol + 1));
  } else {
    doc.text = std::string(file_text);
    const auto paragraphs = split_paragraphs(file_text);
    if (!paragraphs.empty()) doc.summary = paragraphs.front();
  }
  return doc;
}

double KnowledgeGraph::edge_weight(const std::string& a, const std::string& b) const {
  if (a == b) return 1.0;
  const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  const auto it = edge_weights.find(key);
  return it == edge_weights.end() ? 0.0 : it->second;
}

std::vector<std::pair<std::string, std::string>> KnowledgeGraph::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, w] : edge_weights) out.push_back(key);
  return out;
}

namespace {

const std::regex& heading_regex() {
  static const std::regex re(R"(^#*\s*(?:\xC2\xA7\s*|Section\s+)?(\d+(?:\.\d+)*)(?:\s|$))");
  return re;
}

const std::regex& mention_regex() {
  static const std::regex re(R"((?:\xC2\xA7\s*|Section\s+)(\d+(?:\.\d+)*))");
  return re;
}

}  // namespace

std::vector<std::string> defined_section_labels(std::string_view chunk) {
  std::vector<std::string> labels;
  std::istringstream in{std::string(chunk)};
  for (std::string line; std::getline(in, line);) {
    std::smatch m;
    if (std::regex_search(line, m, heading_regex())) labels.push_back(m[1]);
  }
  return labels;
}

std::vector<std::string> section_mentions(std::string_view chunk) {
  std::vector<std::string> mentions;
  std::istringstream in{std::string(chunk)};
  for (std::string line; std::getline(in, line);) {
    std::smatch heading;
    std::size_t skip_until = 0;
    if (std::regex_search(line, heading, heading_regex())) {
      skip_until = static_cast<std::size_t>(heading.position(0) + heading.length(0));
    }
    for (auto it = std::sregex_iterator(line.begin(), line.end(), mention_regex()); it != std::sregex_iterator();
         ++it) {
      if (static_cast<std::size_t>(it->position(0)) < skip_until) continue;
      mentions.push_back((*it)[1]);
    }
  }
  return mentions;
}

std::vector<KnowledgeGraph> build_graph_store(const std::vector<Document>& documents, const StoreOptions& options) {
  struct Group {
    Embedding representative;
    std::vector<const Document*> members;
  };
  std::vector<Group> groups;
  for (const auto& doc : documents) {
    if (doc.summary.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw Error(Errc::kEmptySummary, "document has no summary");
    }
    const auto e = embed(doc.summary);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return cosine(g.representative, e) >= options.group_threshold; });
    if (it == groups.end()) {
      groups.push_back({e, {&doc}});
    } else {
      it->members.push_back(&doc);
    }
  }

  std::vector<KnowledgeGraph> graphs;
  for (const auto& group : groups) {
    KnowledgeGraph g;
    std::string joined;
    std::set<std::string> seen;
    std::vector<std::pair<std::string, std::string>> adjacent;
    for (const auto* doc : group.members) {
      g.summaries.push_back(doc->summary);
      if (!joined.empty()) joined += "\n";
      joined += doc->summary;
      std::string previous;
      for (auto& text : chunk_text(doc->text, options.chunk_tokens)) {
        auto chunk = make_chunk(std::move(text), doc->metadata);
        const auto id = chunk.chunk_id;
        if (seen.insert(id).second) g.nodes.push_back({std::move(chunk)});
        if (!previous.empty() && previous != id) adjacent.emplace_back(previous, id);
        previous = id;
      }
    }
    g.graph_weight = embed(joined);

    std::map<std::string, std::vector<std::string>> defines;
    std::map<std::string, std::vector<std::string>> mentions;
    for (const auto& node : g.nodes) {
      defines[node.chunk.chunk_id] = defined_section_labels(node.chunk.text);
      mentions[node.chunk.chunk_id] = section_mentions(node.chunk.text);
    }
    auto refs_into = [&](const std::string& from, const std::string& to) {
      const auto& labels = defines[to];
      return static_cast<double>(std::count_if(mentions[from].begin(), mentions[from].end(), [&](const auto& m) {
        return std::find(labels.begin(), labels.end(), m) != labels.end();
      }));
    };

    std::set<std::pair<std::string, std::string>> adjacency;
    for (const auto& [a, b] : adjacent) adjacency.insert(a < b ? std::make_pair(a, b) : std::make_pair(b, a));

    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
        auto a = g.nodes[i].chunk.chunk_id;
        auto b = g.nodes[j].chunk.chunk_id;
        if (b < a) std::swap(a, b);
        const double adj = adjacency.contains({a, b}) ? 1.0 : 0.0;
        const double refs = refs_into(a, b) + refs_into(b, a);
        const double w =
            std::clamp(0.5 * adj + 0.5 * std::min(1.0, refs / options.cross_ref_saturation), 0.0, 1.0);
        if (w > 0.0) g.edge_weights[{a, b}] = w;
      }
    }
    graphs.push_back(std::move(g));
  }
  return graphs;
}

namespace {

struct QuerySet {
  std::vector<Embedding> embeddings;
  std::set<std::string> tokens;
};

QuerySet make_query_set(std::string_view original, const std::vector<std::string>& expansions) {
  QuerySet qs;
  qs.embeddings.push_back(embed(original));
  for (const auto& t : content_tokens(original)) qs.tokens.insert(t);
  for (const auto& e : expansions) {
    qs.embeddings.push_back(embed(e));
    for (const auto& t : content_tokens(e)) qs.tokens.insert(t);
  }
  return qs;
}

double metadata_match(const Metadata& metadata, const std::set<std::string>& tokens) {
  if (metadata.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [key, value] : metadata) {
    const auto vt = content_tokens(value);
    if (std::any_of(vt.begin(), vt.end(), [&](const auto& t) { return tokens.contains(t); })) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(metadata.size());
}

RetrievalResult score_chunk(const KnowledgeChunk& chunk, const QuerySet& qs, const StoreOptions& options,
                            Provenance provenance) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& q : qs.embeddings) best = std::max(best, cosine(q, chunk.embedding));
  RetrievalResult r;
  r.chunk = chunk;
  r.cosine = best;
  r.score = options.cosine_weight * best + (1.0 - options.cosine_weight) * metadata_match(chunk.metadata, qs.tokens);
  r.provenance = provenance;
  return r;
}

void rank(std::vector<RetrievalResult>& results) {
  std::stable_sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk.chunk_id < b.chunk.chunk_id;
  });
}

}  // namespace

GraphQueryResult graph_query(const std::vector<KnowledgeGraph>& graphs, std::string_view original_query,
                             const std::vector<std::string>& expansions, std::size_t k, const StoreOptions& options) {
  if (graphs.empty()) throw Error(Errc::kEmptyGraphStore, "no knowledge graphs");
  const auto qs = make_query_set(original_query, expansions);

  GraphQueryResult out;
  double best_graph = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const double c = cosine(graphs[i].graph_weight, qs.embeddings.front());
    if (c > best_graph) {
      best_graph = c;
      out.graph_index = i;
    }
  }
  const auto& g = graphs[out.graph_index];
  if (g.nodes.empty()) return out;

  // Greedy node matching.
  std::vector<std::size_t> match;
  double node_term = 0.0;
  for (const auto& q : qs.embeddings) {
    std::size_t best = 0;
    double best_cos = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < g.nodes.size(); ++n) {
      const double c = cosine(q, g.nodes[n].chunk.embedding);
      if (c > best_cos) {
        best_cos = c;
        best = n;
      }
    }
    match.push_back(best);
    node_term += best_cos;
  }
  node_term /= static_cast<double>(qs.embeddings.size());

  double discrepancy = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < match.size(); ++i) {
    for (std::size_t j = i + 1; j < match.size(); ++j) {
      const double query_edge = std::clamp(cosine(qs.embeddings[i], qs.embeddings[j]), 0.0, 1.0);
      const double graph_edge = g.edge_weight(g.nodes[match[i]].chunk.chunk_id, g.nodes[match[j]].chunk.chunk_id);
      discrepancy += std::abs(query_edge - graph_edge);
      ++pairs;
    }
  }
  out.match_score = node_term - (pairs > 0 ? discrepancy / static_cast<double>(pairs) : 0.0);

  // Hop-count BFS over edges at or above the floor.
  const std::size_t n = g.nodes.size();
  std::vector<std::vector<std::size_t>> adjacency(n);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[g.nodes[i].chunk.chunk_id] = i;
  for (const auto& [key, w] : g.edge_weights) {
    if (w < options.path_edge_floor) continue;
    const auto a = index.at(key.first);
    const auto b = index.at(key.second);
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }
  auto bfs = [&](std::size_t source) {
    std::vector<int> dist(n, -1);
    std::queue<std::size_t> frontier;
    dist[source] = 0;
    frontier.push(source);
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop();
      for (auto v : adjacency[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          frontier.push(v);
        }
      }
    }
    return dist;
  };

  std::set<std::size_t> matched(match.begin(), match.end());
  std::set<std::size_t> selected = matched;
  std::map<std::size_t, std::vector<int>> distances;
  for (auto s : matched) distances[s] = bfs(s);
  for (auto s : matched) {
    for (auto t : matched) {
      if (t <= s) continue;
      const int d = distances[s][t];
      if (d < 0) continue;
      for (std::size_t v = 0; v < n; ++v) {
        if (distances[s][v] >= 0 && distances[t][v] >= 0 && distances[s][v] + distances[t][v] == d) selected.insert(v);
      }
    }
  }

  for (auto m : matched) out.matched_nodes.push_back(g.nodes[m].chunk.chunk_id);
  for (auto v : selected) out.results.push_back(score_chunk(g.nodes[v].chunk, qs, options, Provenance::kGraphPath));
  rank(out.results);
  if (out.results.size() > k) out.results.resize(k);
  return out;
}

namespace {

const std::map<std::string, std::vector<std::string>>& synonym_table() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"maximize", {"optimize", "improve", "increase"}},
      {"maximise", {"optimize", "improve", "increase"}},
      {"optimize", {"maximize", "improve"}},
      {"optimizing", {"maximizing", "improving"}},
      {"optimise", {"maximize", "improve"}},
      {"improve", {"increase", "optimize"}},
      {"sum", {"aggregate", "total"}},
      {"rate", {"throughput", "capacity"}},
      {"rates", {"throughputs", "capacities"}},
      {"throughput", {"rate", "capacity"}},
      {"capacity", {"throughput", "rate"}},
      {"users", {"devices", "terminals"}},
      {"user", {"device", "terminal"}},
      {"devices", {"users", "terminals"}},
      {"performance", {"throughput", "efficiency"}},
      {"system", {"network"}},
      {"network", {"system"}},
      {"multiple", {"several", "many"}},
      {"estimation", {"estimate", "inference"}},
      {"channel", {"link"}},
      {"precoding", {"beamforming"}},
      {"precoder", {"beamformer"}},
      {"beamforming", {"precoding"}},
      {"interference", {"crosstalk"}},
      {"power", {"energy"}},
      {"latency", {"delay"}},
  };
  return table;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

}  // namespace

std::vector<std::string> expand_query(std::string_view query, std::size_t n) {
  std::vector<std::string> out;
  if (n == 0) return out;
  const auto tokens = tokenize(query);
  if (tokens.empty()) return out;
  auto content = content_tokens(query);
  const bool stopwords_only = content.empty();
  if (stopwords_only) content = tokens;
  const std::set<std::string> content_set(content.begin(), content.end());
  const std::string base = join(tokens);
  const std::string content_phrase = join(content);

  std::set<std::string> seen{std::string(query)};
  auto offer = [&](std::string candidate) {
    if (out.size() >= n || candidate.empty()) return;
    const auto ct = stopwords_only ? tokenize(candidate) : content_tokens(candidate);
    const bool shares = std::any_of(ct.begin(), ct.end(), [&](const auto& t) { return content_set.contains(t); });
    if (shares && seen.insert(candidate).second) out.push_back(std::move(candidate));
  };

  // Synonym substitution, round-robin over the tokens so early expansions vary different words.
  std::size_t max_alternatives = 0;
  for (const auto& t : tokens) {
    if (auto it = synonym_table().find(t); it != synonym_table().end()) {
      max_alternatives = std::max(max_alternatives, it->second.size());
    }
  }
  for (std::size_t alt = 0; alt < max_alternatives; ++alt) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto it = synonym_table().find(tokens[i]);
      if (it == synonym_table().end() || alt >= it->second.size()) continue;
      auto rewritten = tokens;
      rewritten[i] = it->second[alt];
      offer(join(rewritten));
    }
  }

  offer(base + " in cell-free massive mimo");
  offer("downlink " + content_phrase);
  offer(content_phrase + " with zero forcing precoding");
  offer(content_phrase + " under per ap power constraints");
  for (std::size_t i = 1; out.size() < n; ++i) offer(content_phrase + " aspect " + std::to_string(i));
  return out;
}

std::vector<RetrievalResult> merge_results(std::vector<RetrievalResult> a, const std::vector<RetrievalResult>& b,
                                           std::size_t k) {
  std::map<std::string, RetrievalResult> best;
  a.insert(a.end(), b.begin(), b.end());
  for (auto& r : a) {
    auto it = best.find(r.chunk.chunk_id);
    if (it == best.end() || r.score > it->second.score) best[r.chunk.chunk_id] = std::move(r);
  }
  std::vector<RetrievalResult> out;
  for (auto& [id, r] : best) out.push_back(std::move(r));
  rank(out);
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<std::string> KnowledgeStore::ingest_document(std::string_view text, const Metadata& metadata) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(Errc::kEmptyDocument, "document has no text");
  }
  std::vector<std::string> ids;
  for (auto& piece : chunk_text(text, options_.chunk_tokens)) {
    auto chunk = make_chunk(std::move(piece), metadata);
    const auto id = chunk.chunk_id;
    if (!chunks_.contains(id)) {
      chunks_.emplace(id, std::move(chunk));
      order_.push_back(id);
    }
    ids.push_back(id);
  }
  return ids;
}

std::vector<std::string> KnowledgeStore::add_document(const Document& document) {
  auto ids = ingest_document(document.text, document.metadata);
  const bool known = std::any_of(documents_.begin(), documents_.end(), [&](const Document& d) {
    return d.summary == document.summary && d.text == document.text;
  });
  if (!known) {
    documents_.push_back(document);
    graphs_ = build_graph_store(documents_, options_);
  }
  return ids;
}

const KnowledgeChunk* KnowledgeStore::find(const std::string& chunk_id) const {
  const auto it = chunks_.find(chunk_id);
  return it == chunks_.end() ? nullptr : &it->second;
}

std::vector<const KnowledgeChunk*> KnowledgeStore::chunks() const {
  std::vector<const KnowledgeChunk*> out;
  for (const auto& id : order_) out.push_back(&chunks_.at(id));
  return out;
}

std::vector<RetrievalResult> KnowledgeStore::retrieve(std::string_view original_query,
                                                      const std::vector<std::string>& expansions,
                                                      std::size_t k) const {
  const auto qs = make_query_set(original_query, expansions);
  std::vector<RetrievalResult> results;
  results.reserve(order_.size());
  for (const auto& id : order_) results.push_back(score_chunk(chunks_.at(id), qs, options_, Provenance::kVector));
  rank(results);
  if (results.size() > k) results.resize(k);
  return results;
}

GraphQueryResult KnowledgeStore::graph_query(std::string_view original_query,
                                             const std::vector<std::string>& expansions, std::size_t k) const {
  return kb::graph_query(graphs_, original_query, expansions, k, options_);
}

json KnowledgeStore::to_json() const {
  json chunks = json::array();
  for (const auto& id : order_) {
    const auto& c = chunks_.at(id);
    chunks.push_back({{"chunk_id", c.chunk_id}, {"text", c.text}, {"metadata", c.metadata}, {"embedding", c.embedding}});
  }
  json graphs = json::array();
  for (const auto& g : graphs_) {
    json nodes = json::array();
    for (const auto& n : g.nodes) nodes.push_back({{"chunk_id", n.chunk.chunk_id}, {"node_weight", n.chunk.embedding}});
    json edges = json::array();
    for (const auto& [key, w] : g.edge_weights) edges.push_back({{"a", key.first}, {"b", key.second}, {"weight", w}});
    graphs.push_back({{"graph_weight", g.graph_weight}, {"summaries", g.summaries}, {"nodes", nodes}, {"edges", edges}});
  }
  json documents = json::array();
  for (const auto& d : documents_) {
    documents.push_back({{"summary", d.summary}, {"text", d.text}, {"metadata", d.metadata}});
  }
  return {{"chunks", chunks}, {"graphs", graphs}, {"documents", documents}};
}

KnowledgeStore KnowledgeStore::from_json(const json& j, StoreOptions options) {
  KnowledgeStore store(options);
  try {
    for (const auto& jc : j.at("chunks")) {
      KnowledgeChunk c;
      c.chunk_id = jc.at("chunk_id").get<std::string>();
      c.text = jc.at("text").get<std::string>();
      c.metadata = jc.at("metadata").get<Metadata>();
      c.embedding = jc.at("embedding").get<Embedding>();
      store.order_.push_back(c.chunk_id);
      store.chunks_.emplace(c.chunk_id, std::move(c));
    }
    if (j.contains("documents")) {
      for (const auto& jd : j.at("documents")) {
        store.documents_.push_back({jd.at("summary").get<std::string>(), jd.at("text").get<std::string>(),
                                    jd.at("metadata").get<Metadata>()});
      }
    }
    for (const auto& jg : j.at("graphs")) {
      KnowledgeGraph g;
      g.graph_weight = jg.at("graph_weight").get<Embedding>();
      g.summaries = jg.at("summaries").get<std::vector<std::string>>();
      for (const auto& jn : jg.at("nodes")) {
        const auto id = jn.at("chunk_id").get<std::string>();
        KnowledgeChunk c;
        if (const auto* known = store.find(id)) c = *known;
        c.chunk_id = id;
        c.embedding = jn.at("node_weight").get<Embedding>();
        g.nodes.push_back({std::move(c)});
      }
      for (const auto& je : jg.at("edges")) {
        g.edge_weights[{je.at("a").get<std::string>(), je.at("b").get<std::string>()}] = je.at("weight").get<double>();
      }
      store.graphs_.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::kParseError, e.what());
  }
  return store;
}

void KnowledgeStore::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kInvalidArgument, "cannot write " + path);
  out << to_json().dump() << "\n";
}

KnowledgeStore KnowledgeStore::load(const std::string& path, StoreOptions options) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kInvalidArgument, "cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Errc::kParseError, path + ": " + e.what());
  }
  return from_json(j, options);
}

KnowledgeStore default_knowledge_store() {
  static const std::vector<Document> corpus = {
      {"Downlink precoding for multi-user MIMO: zero forcing and maximum ratio transmission",
       "Zero forcing precoding inverts the stacked channel matrix so that every user receives no inter-user "
       "interference. It needs at least as many transmit antennas as users and accurate channel state "
       "information; estimation errors leak interference.\n\n"
       "Maximum ratio transmission steers each beam along the user's own channel. It maximizes array gain but "
       "leaves inter-user interference uncontrolled, so its sum rate saturates at high SNR.\n\n"
       "Per-AP power constraints are met by scaling all user powers by the largest per-AP violation ratio, "
       "which keeps the precoding directions unchanged.",
       {{"environment", "cell-free massive mimo downlink"}, {"task", "precoding sum rate"}, {"source", "builtin"}}},
      {"Channel estimation from uplink pilots in massive MIMO",
       "Least-squares channel estimation de-spreads orthogonal pilots. The estimate is unbiased and its error "
       "variance per antenna is the noise power divided by pilot length times pilot power.\n\n"
       "In line-of-sight channels the response is a scaled steering vector. Projecting the least-squares "
       "estimate onto the steering vector of the estimated angle of arrival removes all noise outside that "
       "direction, reducing the error by a factor equal to the number of antennas.",
       {{"environment", "uplink pilot training"}, {"task", "channel estimation"}, {"source", "builtin"}}},
      {"Angle of arrival estimation with uniform linear arrays",
       "A half-wavelength uniform linear array has steering vector entries exp(i pi n sin theta). The spatial "
       "matched-filter spectrum is the squared magnitude of the steering vector inner product with the "
       "received snapshot.\n\n"
       "Scanning a uniform angle grid and taking the peak gives the angle estimate; a finer grid reduces the "
       "quantization error at the cost of more spectrum evaluations.",
       {{"environment", "line of sight"}, {"task", "aoa estimation user positioning"}, {"source", "builtin"}}},
      {"Access point selection in cell-free massive MIMO",
       "Each user is served by the access points with the largest estimated channel gains. Restricting service "
       "to the strongest L access points limits fronthaul load while keeping most of the received power.\n\n"
       "With a single access point every user is served by that access point and selection is trivial.",
       {{"environment", "cell-free massive mimo"}, {"task", "ap selection optimization"}, {"source", "builtin"}}},
      {"Hybrid analog-digital beamforming with DFT codebooks",
       "Hybrid beamforming picks one analog DFT beam per user per access point and applies digital precoding "
       "on the reduced effective channel. Beams that do not align with the user direction lose array gain.",
       {{"environment", "mmwave hybrid arrays"}, {"task", "beamforming precoding"}, {"source", "builtin"}}},
  };
  KnowledgeStore store;
  for (const auto& doc : corpus) store.add_document(doc);
  return store;
}

}  // namespace nativeai::kb
