#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "nativeai/error.hpp"
#include "nativeai/task_model.hpp"
#include "oracles.hpp"

using namespace nativeai;

namespace {

SubtaskSpec spec(const std::string& id) {
  SubtaskSpec s;
  s.id = id;
  s.description = "subtask " + id;
  s.resource_constraints = {{"max_grid_points", 1024}};
  s.evaluation_criteria = {{"sum_rate_bps_hz", Comparator::kGreaterEqual, 1.0}};
  s.execution_node = "edge-0";
  return s;
}

std::vector<SubtaskSpec> specs(std::initializer_list<const char*> ids) {
  std::vector<SubtaskSpec> out;
  for (const auto* id : ids) out.push_back(spec(id));
  return out;
}

Errc error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected nativeai::Error");
  return Errc::kInvalidArgument;
}

}  // namespace

TEST_CASE("build_dag accepts the four-stage chain") {
  auto dag = build_dag(specs({"s1", "s2", "s3", "s4"}), {{"s1", "s2"}, {"s2", "s3"}, {"s3", "s4"}});
  CHECK(dag.subtasks().size() == 4);
  CHECK(dag.edges().size() == 3);
  CHECK(topological_order(dag) == std::vector<std::string>{"s1", "s2", "s3", "s4"});
  CHECK(dag.ancestors("s3") == std::set<std::string>{"s1", "s2"});
}

TEST_CASE("build_dag singleton and errors") {
  auto one = build_dag(specs({"only"}), {});
  CHECK(topological_order(one) == std::vector<std::string>{"only"});

  try {
    build_dag(specs({"s1", "s2"}), {{"s1", "s2"}, {"s2", "s1"}});
    FAIL("cycle not detected");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kCycleDetected);
    const std::string d = e.detail();
    CHECK((d == "s1->s2" || d == "s2->s1"));
  }

  try {
    build_dag(specs({"s1"}), {{"s1", "ghost"}});
    FAIL("dangling edge not detected");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kDanglingEdge);
    CHECK(e.detail() == "ghost");
  }

  CHECK(error_code([] { build_dag(specs({"a", "a"}), {}); }) == Errc::kDuplicateId);
  CHECK(error_code([] { build_dag(specs({"a", "b"}), {{"a", "b"}, {"a", "b"}}); }) == Errc::kDuplicateEdge);
  CHECK(error_code([] { build_dag({}, {}); }) == Errc::kInvalidArgument);

  auto bad = spec("x");
  bad.description.clear();
  CHECK(error_code([&] { build_dag({bad}, {}); }) == Errc::kInvalidSubtask);
}

TEST_CASE("topological_order tie-breaks lexicographically") {
  CHECK(topological_order(build_dag(specs({"b", "a"}), {})) == std::vector<std::string>{"a", "b"});
  const std::vector<Edge> diamond = {{"a", "b"}, {"a", "c"}, {"b", "d"}, {"c", "d"}};
  const auto order = topological_order(build_dag(specs({"d", "c", "b", "a"}), diamond));
  CHECK(order == oracle::smallest_topological_order({"a", "b", "c", "d"}, diamond));
  CHECK(order == std::vector<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("validate_subtask reports violations") {
  const std::set<std::string> nodes = {"cloud", "edge-0"};
  CHECK(validate_subtask(spec("ok"), nodes).ok());

  auto far = spec("far");
  far.execution_node = "edge-99";
  auto r = validate_subtask(far, nodes);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0] == Violation::kUnknownNode);

  auto inf = spec("inf");
  inf.evaluation_criteria[0].threshold = std::numeric_limits<double>::infinity();
  r = validate_subtask(inf, nodes);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0] == Violation::kNonFiniteThreshold);

  auto empty = spec("e");
  empty.description.clear();
  CHECK(validate_subtask(empty, nodes).violations == std::vector<Violation>{Violation::kEmptyDescription});
}

TEST_CASE("random DAGs: order respects edges and matches the brute-force oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 50);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("n" + std::to_string(1000 + (rng() % 9000)) + "_" + std::to_string(i));
    // Edges only go forward in a hidden permutation, so the graph is acyclic.
    std::vector<std::string> hidden = ids;
    std::shuffle(hidden.begin(), hidden.end(), rng);
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (rng() % 8 == 0) edges.emplace_back(hidden[static_cast<std::size_t>(i)], hidden[static_cast<std::size_t>(j)]);
      }
    }
    std::vector<SubtaskSpec> subtasks;
    for (const auto& id : ids) subtasks.push_back(spec(id));
    REQUIRE_FALSE(oracle::has_cycle(ids, edges));
    const auto dag = build_dag(subtasks, edges);
    const auto order = topological_order(dag);
    REQUIRE(order.size() == ids.size());
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const auto& [a, b] : edges) CHECK(pos[a] < pos[b]);
    if (n <= 7) CHECK(order == oracle::smallest_topological_order(ids, edges));

    // Inject a back edge along an existing path: must be rejected.
    if (!edges.empty()) {
      auto with_back = edges;
      with_back.emplace_back(edges.front().second, edges.front().first);
      REQUIRE(oracle::has_cycle(ids, with_back));
      CHECK(error_code([&] { build_dag(subtasks, with_back); }) == Errc::kCycleDetected);
    }
  }
}

TEST_CASE("DAG JSON round trip is identity") {
  auto subtasks = specs({"aoa", "est", "sel"});
  subtasks[0].tool_selection = ToolSelection{"aoa-grid", {{"grid_points", 512}, {"pilot_length", 8}}};
  subtasks[1].evaluation_criteria.push_back({"nmse_db", Comparator::kLessEqual, -3.25});
  subtasks[2].resource_constraints["power_budget"] = 0.1 + 0.2;
  const auto dag = build_dag(subtasks, {{"aoa", "est"}, {"est", "sel"}});
  const auto text = dag_to_string(dag);
  const auto back = dag_from_json(nlohmann::json::parse(text));
  CHECK(back == dag);
  CHECK(dag_to_string(back) == text);

  const auto j = to_json(dag);
  CHECK(j.at("subtasks").at(1).at("tool_selection").is_null());
  CHECK(j.at("subtasks").at(0).at("tool_selection").at("tool_id") == "aoa-grid");
  CHECK(j.at("edges").at(0) == nlohmann::json::array({"aoa", "est"}));
  for (const char* key : {"id", "description", "resource_constraints", "evaluation_criteria", "tool_selection",
                          "execution_node"}) {
    CHECK(j.at("subtasks").at(0).contains(key));
  }
  CHECK(error_code([] { dag_from_json(nlohmann::json::parse(R"({"subtasks": 3})")); }) == Errc::kParseError);
}

TEST_CASE("comparators") {
  CHECK(compare(5.0, Comparator::kGreaterEqual, 5.0));
  CHECK_FALSE(compare(5.0, Comparator::kGreater, 5.0));
  CHECK(compare(-1.0, Comparator::kLess, 0.0));
  CHECK(parse_comparator(comparator_symbol(Comparator::kEqual)) == Comparator::kEqual);
  CHECK(error_code([] { parse_comparator("=>"); }) == Errc::kParseError);
}
