#include "nativeai/task_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "nativeai/error.hpp"

namespace nativeai {

using nlohmann::json;

std::string intent_kind_name(IntentKind kind) {
  switch (kind) {
    case IntentKind::kMaximizeSumRate:
      return "MaximizeSumRate";
  }
  return "Unknown";
}

std::string comparator_symbol(Comparator op) {
  switch (op) {
    case Comparator::kGreaterEqual:
      return ">=";
    case Comparator::kLessEqual:
      return "<=";
    case Comparator::kGreater:
      return ">";
    case Comparator::kLess:
      return "<";
    case Comparator::kEqual:
      return "==";
  }
  return "?";
}

Comparator parse_comparator(const std::string& symbol) {
  if (symbol == ">=") return Comparator::kGreaterEqual;
  if (symbol == "<=") return Comparator::kLessEqual;
  if (symbol == ">") return Comparator::kGreater;
  if (symbol == "<") return Comparator::kLess;
  if (symbol == "==") return Comparator::kEqual;
  throw Error(Errc::kParseError, "unknown comparator '" + symbol + "'");
}

bool compare(double observed, Comparator op, double threshold) {
  switch (op) {
    case Comparator::kGreaterEqual:
      return observed >= threshold;
    case Comparator::kLessEqual:
      return observed <= threshold;
    case Comparator::kGreater:
      return observed > threshold;
    case Comparator::kLess:
      return observed < threshold;
    case Comparator::kEqual:
      return observed == threshold;
  }
  return false;
}

std::string violation_name(Violation v) {
  switch (v) {
    case Violation::kEmptyId:
      return "EmptyId";
    case Violation::kEmptyDescription:
      return "EmptyDescription";
    case Violation::kUnknownNode:
      return "UnknownNode";
    case Violation::kNonFiniteThreshold:
      return "NonFiniteThreshold";
    case Violation::kNonFiniteBudget:
      return "NonFiniteBudget";
  }
  return "Unknown";
}

namespace {

ValidationResult validate_intrinsic(const SubtaskSpec& spec) {
  ValidationResult result;
  if (spec.id.empty()) result.violations.push_back(Violation::kEmptyId);
  if (spec.description.empty()) result.violations.push_back(Violation::kEmptyDescription);
  for (const auto& c : spec.evaluation_criteria) {
    if (!std::isfinite(c.threshold)) {
      result.violations.push_back(Violation::kNonFiniteThreshold);
      break;
    }
  }
  for (const auto& [name, budget] : spec.resource_constraints) {
    if (!std::isfinite(budget)) {
      result.violations.push_back(Violation::kNonFiniteBudget);
      break;
    }
  }
  return result;
}

}  // namespace

ValidationResult validate_subtask(const SubtaskSpec& spec, const std::set<std::string>& known_nodes) {
  auto result = validate_intrinsic(spec);
  if (!known_nodes.contains(spec.execution_node)) {
    result.violations.push_back(Violation::kUnknownNode);
  }
  return result;
}

const SubtaskSpec& TaskDAG::subtask(const std::string& id) const {
  auto it = std::find_if(subtasks_.begin(), subtasks_.end(), [&](const auto& s) { return s.id == id; });
  if (it == subtasks_.end()) throw Error(Errc::kInvalidArgument, "no subtask '" + id + "'");
  return *it;
}

bool TaskDAG::contains(const std::string& id) const {
  return std::any_of(subtasks_.begin(), subtasks_.end(), [&](const auto& s) { return s.id == id; });
}

std::set<std::string> TaskDAG::ancestors(const std::string& id) const {
  std::set<std::string> seen;
  std::vector<std::string> stack{id};
  while (!stack.empty()) {
    auto current = stack.back();
    stack.pop_back();
    for (const auto& [from, to] : edges_) {
      if (to == current && seen.insert(from).second) stack.push_back(from);
    }
  }
  return seen;
}

TaskDAG TaskDAG::with_subtask(const SubtaskSpec& replacement) const {
  TaskDAG copy = *this;
  for (auto& s : copy.subtasks_) {
    if (s.id == replacement.id) {
      s = replacement;
      return copy;
    }
  }
  throw Error(Errc::kInvalidArgument, "no subtask '" + replacement.id + "'");
}

namespace {

// Returns one edge lying on a cycle, or nullopt when the graph is acyclic.
std::optional<Edge> find_cycle_edge(const std::vector<std::string>& ids, const std::vector<Edge>& edges) {
  std::map<std::string, std::vector<std::string>> adjacency;
  for (const auto& [from, to] : edges) adjacency[from].push_back(to);
  for (auto& [k, v] : adjacency) std::sort(v.begin(), v.end());

  enum class Mark { kWhite, kGrey, kBlack };
  std::map<std::string, Mark> mark;
  for (const auto& id : ids) mark[id] = Mark::kWhite;

  std::optional<Edge> found;
  std::function<void(const std::string&)> visit = [&](const std::string& node) {
    mark[node] = Mark::kGrey;
    for (const auto& next : adjacency[node]) {
      if (found) return;
      if (mark[next] == Mark::kGrey) {
        found = Edge{node, next};
        return;
      }
      if (mark[next] == Mark::kWhite) visit(next);
    }
    mark[node] = Mark::kBlack;
  };
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& id : sorted) {
    if (found) break;
    if (mark[id] == Mark::kWhite) visit(id);
  }
  return found;
}

}  // namespace

TaskDAG build_dag(std::vector<SubtaskSpec> subtasks, std::vector<Edge> edges) {
  if (subtasks.empty()) throw Error(Errc::kInvalidArgument, "a DAG needs at least one subtask");

  std::set<std::string> ids;
  for (const auto& s : subtasks) {
    auto check = validate_intrinsic(s);
    if (!check.ok()) {
      throw Error(Errc::kInvalidSubtask, "subtask '" + s.id + "': " + violation_name(check.violations.front()));
    }
    if (!ids.insert(s.id).second) throw Error(Errc::kDuplicateId, s.id);
  }

  std::set<Edge> seen_edges;
  for (const auto& e : edges) {
    if (!ids.contains(e.first)) throw Error(Errc::kDanglingEdge, e.first);
    if (!ids.contains(e.second)) throw Error(Errc::kDanglingEdge, e.second);
    if (!seen_edges.insert(e).second) throw Error(Errc::kDuplicateEdge, e.first + "->" + e.second);
  }

  std::vector<std::string> id_list(ids.begin(), ids.end());
  if (auto cycle = find_cycle_edge(id_list, edges)) {
    throw Error(Errc::kCycleDetected, cycle->first + "->" + cycle->second);
  }

  TaskDAG dag;
  dag.subtasks_ = std::move(subtasks);
  dag.edges_ = std::move(edges);
  return dag;
}

std::vector<std::string> topological_order(const TaskDAG& dag) {
  std::map<std::string, int> in_degree;
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& s : dag.subtasks()) in_degree[s.id] = 0;
  for (const auto& [from, to] : dag.edges()) {
    ++in_degree[to];
    out[from].push_back(to);
  }

  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, deg] : in_degree) {
    if (deg == 0) ready.push(id);
  }

  std::vector<std::string> order;
  order.reserve(in_degree.size());
  while (!ready.empty()) {
    auto id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& next : out[id]) {
      if (--in_degree[next] == 0) ready.push(next);
    }
  }
  return order;
}

json to_json(const TaskDAG& dag) {
  json subtasks = json::array();
  for (const auto& s : dag.subtasks()) {
    json criteria = json::array();
    for (const auto& c : s.evaluation_criteria) {
      criteria.push_back({{"metric", c.metric}, {"op", comparator_symbol(c.op)}, {"threshold", c.threshold}});
    }
    json tool = nullptr;
    if (s.tool_selection) {
      tool = {{"tool_id", s.tool_selection->tool_id}, {"params", json(s.tool_selection->params)}};
    }
    subtasks.push_back({{"id", s.id},
                        {"description", s.description},
                        {"resource_constraints", json(s.resource_constraints)},
                        {"evaluation_criteria", criteria},
                        {"tool_selection", tool},
                        {"execution_node", s.execution_node}});
  }
  json edges = json::array();
  for (const auto& [from, to] : dag.edges()) edges.push_back(json::array({from, to}));
  return {{"subtasks", subtasks}, {"edges", edges}};
}

TaskDAG dag_from_json(const json& j) {
  try {
    std::vector<SubtaskSpec> subtasks;
    for (const auto& js : j.at("subtasks")) {
      SubtaskSpec s;
      s.id = js.at("id").get<std::string>();
      s.description = js.at("description").get<std::string>();
      s.resource_constraints = js.at("resource_constraints").get<ParamMap>();
      for (const auto& jc : js.at("evaluation_criteria")) {
        s.evaluation_criteria.push_back({jc.at("metric").get<std::string>(),
                                         parse_comparator(jc.at("op").get<std::string>()),
                                         jc.at("threshold").get<double>()});
      }
      const auto& jt = js.at("tool_selection");
      if (!jt.is_null()) {
        s.tool_selection = ToolSelection{jt.at("tool_id").get<std::string>(), jt.at("params").get<ParamMap>()};
      }
      s.execution_node = js.at("execution_node").get<std::string>();
      subtasks.push_back(std::move(s));
    }
    std::vector<Edge> edges;
    for (const auto& je : j.at("edges")) {
      if (!je.is_array() || je.size() != 2) throw Error(Errc::kParseError, "edge must be a [from, to] pair");
      edges.emplace_back(je[0].get<std::string>(), je[1].get<std::string>());
    }
    return build_dag(std::move(subtasks), std::move(edges));
  } catch (const json::exception& e) {
    throw Error(Errc::kParseError, e.what());
  }
}

std::string dag_to_string(const TaskDAG& dag) { return to_json(dag).dump(2) + "\n"; }

}  // namespace nativeai
