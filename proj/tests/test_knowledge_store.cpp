#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "nativeai/error.hpp"
#include "nativeai/knowledge_store.hpp"
#include "oracles.hpp"

using namespace nativeai;
using namespace nativeai::kb;

namespace {

std::string words(const std::string& stem, int n) {
  std::ostringstream out;
  for (int i = 0; i < n; ++i) out << (i ? " " : "") << stem << i;
  return out.str();
}

double norm(const Embedding& e) {
  double s = 0;
  for (double x : e) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("embed: zero vector, determinism, reference implementation") {
  const auto zero = embed("");
  CHECK(zero.size() == 256);
  CHECK(norm(zero) == 0.0);
  CHECK(norm(embed("  \n\t ")) == 0.0);
  CHECK(embed("zero forcing") == embed("zero forcing"));

  for (const char* text : {"Zero forcing precoder", "pilot contamination", "a b c a b c", "Section 4.2, 3GPP TS 38.211"}) {
    const auto mine = embed(text);
    const auto ref = oracle::embed(text);
    for (std::size_t i = 0; i < mine.size(); ++i) CHECK(mine[i] == doctest::Approx(ref[i]).epsilon(1e-15));
    CHECK(norm(mine) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == oracle::fnv1a("a"));
}

TEST_CASE("embed: related phrases are closer than unrelated ones") {
  const double related_ref = oracle::cosine(oracle::embed("zero forcing precoder"), oracle::embed("zero forcing precoding"));
  const double unrelated_ref = oracle::cosine(oracle::embed("zero forcing precoder"), oracle::embed("pilot contamination"));
  REQUIRE(related_ref > unrelated_ref);
  const double related = cosine(embed("zero forcing precoder"), embed("zero forcing precoding"));
  const double unrelated = cosine(embed("zero forcing precoder"), embed("pilot contamination"));
  CHECK(related == doctest::Approx(related_ref));
  CHECK(unrelated == doctest::Approx(unrelated_ref));
  CHECK(related > unrelated);
}

TEST_CASE("content_hash is 16 hex digits and deterministic") {
  const auto h = content_hash("hello");
  CHECK(h.size() == 16);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(h == content_hash("hello"));
  CHECK(h != content_hash("hello!"));
}

TEST_CASE("ingest_document chunking and idempotence") {
  KnowledgeStore store;
  CHECK(store.ingest_document(words("w", 10), {}).size() == 1);

  KnowledgeStore two;
  const auto ids = two.ingest_document(words("a", 200) + "\n\n" + words("b", 200), {{"source", "doc"}});
  CHECK(ids.size() == 2);  // 200 + 200 > 256
  CHECK(two.size() == 2);

  KnowledgeStore merged;
  CHECK(merged.ingest_document(words("a", 100) + "\n\n" + words("b", 100), {}).size() == 1);

  const auto again = two.ingest_document(words("a", 200) + "\n\n" + words("b", 200), {{"source", "doc"}});
  CHECK(again == ids);
  CHECK(two.size() == 2);

  // An oversized paragraph is split into windows.
  CHECK(chunk_text(words("x", 600), 256).size() == 3);

  try {
    store.ingest_document(" \n ", {});
    FAIL("expected EmptyDocument");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kEmptyDocument);
  }
  for (const auto* c : two.chunks()) CHECK(norm(c->embedding) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("expand_query keeps a content token and never repeats the query") {
  const std::string q = "maximize sum rate for 3 users";
  const auto ex = expand_query(q, 3);
  REQUIRE(ex.size() == 3);
  CHECK(std::set<std::string>(ex.begin(), ex.end()).size() == 3);
  for (const auto& e : ex) {
    CHECK(e != q);
    const auto t = tokenize(e);
    const bool shares = std::count(t.begin(), t.end(), "sum") + std::count(t.begin(), t.end(), "rate") +
                            std::count(t.begin(), t.end(), "users") > 0;
    CHECK(shares);
  }
  CHECK(expand_query(q, 0).empty());
  CHECK(expand_query("  ?! ", 3).empty());

  for (const char* query : {"x", "Optimizing system performance for multiple users", "the"}) {
    const auto many = expand_query(query, 12);
    CHECK(many.size() == 12);
    CHECK(std::set<std::string>(many.begin(), many.end()).size() == 12);
    for (const auto& e : many) CHECK(e != query);
  }
  CHECK(expand_query(q, 5) == expand_query(q, 5));
}

TEST_CASE("retrieve: exact match at rank 1 with cosine 1, k bound, dedup") {
  KnowledgeStore store;
  const std::string target = "Zero forcing nulls inter-user interference through the pseudo-inverse.";
  store.ingest_document(target, {{"source", "zf"}});
  store.ingest_document("Pilot contamination limits massive MIMO.", {{"source", "pilots"}});
  store.ingest_document("Angle of arrival estimation with a uniform linear array.", {{"source", "aoa"}});

  const auto res = store.retrieve(target, {}, 10);
  REQUIRE(res.size() == 3);
  CHECK(res[0].chunk.text == target);
  CHECK(res[0].cosine == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res[0].provenance == Provenance::kVector);

  // Two expansions hitting the same chunk still yield one copy.
  const auto dup = store.retrieve("zero forcing", {"zero forcing interference", "forcing pseudo-inverse"}, 10);
  std::set<std::string> ids;
  for (const auto& r : dup) CHECK(ids.insert(r.chunk.chunk_id).second);
  CHECK(store.retrieve(target, {}, 1).size() == 1);
  CHECK(store.retrieve(target, {}, 0).empty());
}

TEST_CASE("retrieve: metadata match lifts the blended score") {
  KnowledgeStore store;
  store.ingest_document("beam codebook design", {{"task", "precoding"}});
  store.ingest_document("beam codebook design notes", {{"task", "scheduling"}});
  const auto res = store.retrieve("beam codebook precoding", {}, 2);
  REQUIRE(res.size() == 2);
  CHECK(res[0].chunk.metadata.at("task") == "precoding");
  CHECK(res[0].score == doctest::Approx(0.8 * res[0].cosine + 0.2 * 1.0));
}

TEST_CASE("retrieve property: random corpora") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> vocab = {"zero", "forcing", "pilot", "beam", "rate", "sum", "angle", "array",
                                          "power", "noise", "user", "access", "point", "channel", "graph", "mimo"};
  for (int trial = 0; trial < 20; ++trial) {
    KnowledgeStore store;
    const int docs = 1 + static_cast<int>(rng() % 200);
    for (int d = 0; d < docs; ++d) {
      std::string text;
      for (int w = 0; w < 3 + static_cast<int>(rng() % 8); ++w) text += vocab[rng() % vocab.size()] + " ";
      store.ingest_document(text, {{"env", vocab[rng() % vocab.size()]}});
    }
    const std::size_t k = rng() % 15;
    const auto res = store.retrieve("sum rate beam", expand_query("sum rate beam", 3), k);
    CHECK(res.size() <= k);
    CHECK(res.size() == std::min(k, store.size()));
    std::set<std::string> ids;
    for (std::size_t i = 0; i < res.size(); ++i) {
      CHECK(ids.insert(res[i].chunk.chunk_id).second);
      if (i > 0) CHECK(res[i - 1].score >= res[i].score);
      CHECK(res[i].score >= -1.0);
      CHECK(res[i].score <= 1.0);
    }
  }
}

TEST_CASE("parse_document summary line") {
  auto d = parse_document("SUMMARY: Precoding notes\nBody one.\n\nBody two.", {});
  CHECK(d.summary == "Precoding notes");
  CHECK(d.text == "Body one.\n\nBody two.");
  auto plain = parse_document("First paragraph here.\n\nSecond.", {});
  CHECK(plain.summary == "First paragraph here.");
  CHECK(plain.text == "First paragraph here.\n\nSecond.");
  CHECK(parse_document("summary: lower case is text", {}).summary == "summary: lower case is text");
}

TEST_CASE("build_graph_store grouping and edge weights") {
  const Document a{"Zero forcing precoding", "alpha text", {}};
  const Document b{"Zero forcing precoding", "beta text", {}};
  const Document c{"Pilot contamination survey", "gamma text", {}};
  auto graphs = build_graph_store({a, b, c});
  REQUIRE(graphs.size() == 2);
  CHECK(graphs[0].nodes.size() == 2);
  CHECK(graphs[0].summaries.size() == 2);
  CHECK(norm(graphs[0].graph_weight) == doctest::Approx(1.0));

  auto single = build_graph_store({Document{"s", "one chunk only", {}}});
  REQUIRE(single.size() == 1);
  CHECK(single[0].nodes.size() == 1);
  CHECK(single[0].edge_weights.empty());

  StoreOptions small;
  small.chunk_tokens = 3;
  auto pair = build_graph_store({Document{"s", "one two three\n\nfour five six", {}}}, small);
  REQUIRE(pair[0].nodes.size() == 2);
  const auto& n0 = pair[0].nodes[0].chunk.chunk_id;
  const auto& n1 = pair[0].nodes[1].chunk.chunk_id;
  CHECK(pair[0].edge_weight(n0, n1) == doctest::Approx(0.5 * 1 + 0.5 * std::min(1.0, 0.0 / 3)));
  CHECK(pair[0].edge_weight(n1, n0) == pair[0].edge_weight(n0, n1));

  try {
    build_graph_store({Document{"  ", "text", {}}});
    FAIL("expected EmptySummary");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kEmptySummary);
  }
}

TEST_CASE("cross references add to edge weights") {
  StoreOptions small;
  small.chunk_tokens = 8;
  const std::string text =
      "## 2 Power scaling\nscale all users\n\n"
      "unrelated filler words here\n\n"
      "see Section 2 and §2";
  auto g = build_graph_store({Document{"s", text, {}}}, small);
  REQUIRE(g[0].nodes.size() == 3);
  CHECK(defined_section_labels(g[0].nodes[0].chunk.text) == std::vector<std::string>{"2"});
  CHECK(section_mentions(g[0].nodes[2].chunk.text) == std::vector<std::string>{"2", "2"});
  CHECK(section_mentions("## 2 Power scaling").empty());
  const auto& first = g[0].nodes[0].chunk.chunk_id;
  const auto& last = g[0].nodes[2].chunk.chunk_id;
  CHECK(g[0].edge_weight(first, last) == doctest::Approx(0.5 * std::min(1.0, 2.0 / 3.0)));
  CHECK(g[0].edge_weight(first, g[0].nodes[1].chunk.chunk_id) == doctest::Approx(0.5));
}

TEST_CASE("graph store properties on random corpora") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> summaries = {"zero forcing precoding", "pilot design", "angle estimation"};
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Document> docs;
    for (int d = 0; d < 6; ++d) {
      std::string text;
      for (int p = 0; p < 4; ++p) {
        text += "para " + std::to_string(rng() % 1000) + " see Section " + std::to_string(rng() % 3) + "\n\n";
        if (rng() % 2) text += "## " + std::to_string(rng() % 3) + " heading\n\n";
      }
      docs.push_back({summaries[rng() % summaries.size()], text, {}});
    }
    StoreOptions small;
    small.chunk_tokens = 6;
    for (const auto& g : build_graph_store(docs, small)) {
      std::set<std::string> nodes;
      for (const auto& n : g.nodes) nodes.insert(n.chunk.chunk_id);
      for (const auto& [key, w] : g.edge_weights) {
        CHECK(key.first < key.second);
        CHECK(nodes.contains(key.first));
        CHECK(nodes.contains(key.second));
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        CHECK(g.edge_weight(key.second, key.first) == w);
      }
    }

    // Identical summaries: permuting documents keeps the (node, edge weight) multiset.
    std::vector<Document> same = docs;
    for (auto& d : same) d.summary = "zero forcing precoding";
    auto forward = build_graph_store(same, small);
    std::reverse(same.begin(), same.end());
    auto backward = build_graph_store(same, small);
    REQUIRE(forward.size() == 1);
    REQUIRE(backward.size() == 1);
    std::multiset<std::string> fn, bn;
    for (const auto& n : forward[0].nodes) fn.insert(n.chunk.chunk_id);
    for (const auto& n : backward[0].nodes) bn.insert(n.chunk.chunk_id);
    CHECK(fn == bn);
  }
}

TEST_CASE("graph_query: empty store, single node, three-node path") {
  try {
    graph_query({}, "q", {}, 5);
    FAIL("expected EmptyGraphStore");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kEmptyGraphStore);
  }

  auto single = build_graph_store({Document{"s", "lonely node text", {}}});
  auto r = graph_query(single, "anything at all", {}, 5);
  REQUIRE(r.results.size() == 1);
  CHECK(r.results[0].chunk.text == "lonely node text");
  CHECK(r.results[0].provenance == Provenance::kGraphPath);

  // Path graph a - b - c: consecutive chunks, no a-c edge.
  StoreOptions small;
  small.chunk_tokens = 3;
  const std::string a = "alpha apple apricot", b = "bravo banana berry", c = "charlie cherry citrus";
  auto path = build_graph_store({Document{"fruit", a + "\n\n" + b + "\n\n" + c, {}}}, small);
  REQUIRE(path[0].nodes.size() == 3);
  const auto& g = path[0];

  // Brute-force shortest paths (Floyd-Warshall on hop counts over edges >= floor).
  const std::size_t n = g.nodes.size();
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, 1 << 20));
  for (std::size_t i = 0; i < n; ++i) {
    dist[i][i] = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && g.edge_weight(g.nodes[i].chunk.chunk_id, g.nodes[j].chunk.chunk_id) >= 0.25) dist[i][j] = 1;
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);
  std::set<std::string> expected;
  for (std::size_t v = 0; v < n; ++v) {
    if (dist[0][v] + dist[v][2] == dist[0][2]) expected.insert(g.nodes[v].chunk.chunk_id);
  }
  REQUIRE(expected.size() == 3);

  auto res = graph_query(path, a, {c}, 10);
  std::set<std::string> got;
  for (const auto& x : res.results) got.insert(x.chunk.chunk_id);
  CHECK(got == expected);
  CHECK(res.matched_nodes.size() == 2);
  CHECK(graph_query(path, a, {c}, 2).results.size() == 2);
}

TEST_CASE("graph_query match score penalizes edge discrepancy") {
  StoreOptions small;
  small.chunk_tokens = 3;
  auto path = build_graph_store({Document{"fruit", "alpha apple apricot\n\nbravo banana berry", {}}}, small);
  const auto r = graph_query(path, "alpha apple apricot", {"bravo banana berry"}, 5);
  const double qcos = std::clamp(oracle::cosine(oracle::embed("alpha apple apricot"), oracle::embed("bravo banana berry")), 0.0, 1.0);
  CHECK(r.match_score == doctest::Approx(1.0 - std::fabs(qcos - 0.5)));
}

TEST_CASE("store persistence round trip") {
  auto store = default_knowledge_store();
  const auto path = (std::filesystem::temp_directory_path() / "nativeai_store_test.json").string();
  store.save(path);
  const auto loaded = KnowledgeStore::load(path);
  CHECK(loaded.size() == store.size());
  CHECK(loaded.graphs().size() == store.graphs().size());
  const std::string q = "zero forcing precoding per-AP power";
  const auto a = store.retrieve(q, expand_query(q, 3), 5);
  const auto b = loaded.retrieve(q, expand_query(q, 3), 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].chunk.chunk_id == b[i].chunk.chunk_id);
    CHECK(a[i].score == b[i].score);
  }
  const auto ga = store.graph_query(q, {}, 5);
  const auto gb = loaded.graph_query(q, {}, 5);
  CHECK(ga.graph_index == gb.graph_index);
  CHECK(ga.match_score == gb.match_score);
  std::filesystem::remove(path);
}

TEST_CASE("merge_results deduplicates and re-ranks") {
  auto chunk = [](const std::string& t) { return make_chunk(t, {}); };
  std::vector<RetrievalResult> a = {{chunk("x"), 0.5, 0.5, Provenance::kVector}, {chunk("y"), 0.4, 0.4, Provenance::kVector}};
  std::vector<RetrievalResult> b = {{chunk("x"), 0.9, 0.9, Provenance::kGraphPath}, {chunk("z"), 0.1, 0.1, Provenance::kGraphPath}};
  const auto m = merge_results(a, b, 10);
  REQUIRE(m.size() == 3);
  CHECK(m[0].chunk.text == "x");
  CHECK(m[0].score == 0.9);
  CHECK(m[0].provenance == Provenance::kGraphPath);
  CHECK(merge_results(a, b, 2).size() == 2);
}
