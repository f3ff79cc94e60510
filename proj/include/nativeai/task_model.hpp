#pragma once

// Task DAG shared by the planning agents and the edge executor.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace nativeai {

using ParamMap = std::map<std::string, double>;

enum class IntentKind { kMaximizeSumRate };

std::string intent_kind_name(IntentKind kind);

struct TaskIntent {
  IntentKind kind = IntentKind::kMaximizeSumRate;
  std::string target_metric;
  std::string scenario_ref;
  std::string raw_query;
};

enum class Comparator { kGreaterEqual, kLessEqual, kGreater, kLess, kEqual };

std::string comparator_symbol(Comparator op);
Comparator parse_comparator(const std::string& symbol);
bool compare(double observed, Comparator op, double threshold);

struct Criterion {
  std::string metric;
  Comparator op = Comparator::kGreaterEqual;
  double threshold = 0.0;

  bool operator==(const Criterion&) const = default;
};

struct ToolSelection {
  std::string tool_id;
  ParamMap params;

  bool operator==(const ToolSelection&) const = default;
};

struct SubtaskSpec {
  std::string id;
  std::string description;
  ParamMap resource_constraints;
  std::vector<Criterion> evaluation_criteria;
  std::optional<ToolSelection> tool_selection;
  std::string execution_node;

  bool operator==(const SubtaskSpec&) const = default;
};

using Edge = std::pair<std::string, std::string>;

enum class Violation { kEmptyId, kEmptyDescription, kUnknownNode, kNonFiniteThreshold, kNonFiniteBudget };

std::string violation_name(Violation v);

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationResult validate_subtask(const SubtaskSpec& spec, const std::set<std::string>& known_nodes);

// Immutable once built; construct through build_dag so the invariants hold.
class TaskDAG {
 public:
  const std::vector<SubtaskSpec>& subtasks() const { return subtasks_; }
  const std::vector<Edge>& edges() const { return edges_; }

  const SubtaskSpec& subtask(const std::string& id) const;
  bool contains(const std::string& id) const;

  // Ids of every subtask from which `id` is reachable.
  std::set<std::string> ancestors(const std::string& id) const;

  // Copy with one subtask replaced (same id). Used when reflection edits a tool selection.
  TaskDAG with_subtask(const SubtaskSpec& replacement) const;

  bool operator==(const TaskDAG&) const = default;

 private:
  friend TaskDAG build_dag(std::vector<SubtaskSpec> subtasks, std::vector<Edge> edges);
  std::vector<SubtaskSpec> subtasks_;
  std::vector<Edge> edges_;
};

// Throws Error{kDuplicateId, kDanglingEdge, kDuplicateEdge, kCycleDetected, kInvalidSubtask}.
TaskDAG build_dag(std::vector<SubtaskSpec> subtasks, std::vector<Edge> edges);

// Kahn's algorithm with a min-heap on ids, so ties resolve lexicographically.
std::vector<std::string> topological_order(const TaskDAG& dag);

nlohmann::json to_json(const TaskDAG& dag);
TaskDAG dag_from_json(const nlohmann::json& j);

// Canonical text form used for files and the cloud-to-edge handoff.
std::string dag_to_string(const TaskDAG& dag);

}  // namespace nativeai
