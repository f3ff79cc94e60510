#pragma once

// Supervisor and specialist behaviours. The scripted backend is a set of
// deterministic rules; a remote backend can stand in for any operation via
// RemoteBackend, with the caller falling back to the scripted rules.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nativeai/knowledge_store.hpp"
#include "nativeai/phy_sim.hpp"
#include "nativeai/task_model.hpp"
#include "nativeai/toolkit.hpp"

namespace nativeai::agents {

enum class Role { kSupervisor, kSpecialist };
enum class BackendKind { kScripted, kRemote };

std::string role_name(Role role);
std::string backend_name(BackendKind kind);

struct AgentProfile {
  std::string agent_id;
  Role role = Role::kSpecialist;
  std::set<std::string> capabilities;
  std::string functional_description;
  BackendKind backend = BackendKind::kScripted;
  // Scripted specialists cap these params at the given values; joint plans keep the minimum.
  ParamMap param_preferences;
};

// Supervisor plus aoa, optimization, and precoding specialists.
std::vector<AgentProfile> default_roster();

// Scripted rule table. context["target_metric"] overrides the metric. Throws kUnrecognizedIntent.
TaskIntent identify_intent(const std::string& query, const std::map<std::string, std::string>& context = {});

struct DecomposeOptions {
  double sum_rate_floor = 1.0;
  double max_grid_points = 1024;
  double pilot_budget_factor = 4;  // max_pilot_symbols = factor * configured pilot length
  std::string execution_node = "edge-0";
};

// Nodes a scenario declares: cloud and the edge executor.
std::set<std::string> scenario_nodes(const phy::ScenarioConfig& config);

// Throws kUnsupportedIntent.
TaskDAG decompose(const TaskIntent& intent, const phy::ScenarioConfig& config, const DecomposeOptions& options = {});

// A subtask's capability tag is its id.
const std::string& capability_of(const SubtaskSpec& subtask);

struct TeamAssignment {
  std::map<std::string, std::vector<std::string>> members;  // subtask id -> agent ids
  std::set<std::string> joint;                              // subtasks with several assignees
};

// Throws kNoCapableSpecialist naming the uncovered subtask.
TeamAssignment assemble_team(const TaskDAG& dag, const std::vector<AgentProfile>& roster);

struct AgentPlan {
  std::string subtask_id;
  std::string tool_id;
  ParamMap params;
  ParamMap predicted_metrics;
  std::string rationale;
  std::vector<std::string> contributors;

  bool operator==(const AgentPlan&) const = default;
};

nlohmann::json to_json(const AgentPlan& plan);
AgentPlan plan_from_json(const nlohmann::json& j, const std::string& subtask_id);

// Planner-visible tools of the subtask's capability whose min_params fit the budgets,
// best first.
std::vector<const ToolDescriptor*> feasible_tools(const SubtaskSpec& subtask, const ToolRegistry& registry);

// Plan with a specific tool: defaults, preference caps, budget clamps, predictor.
AgentPlan plan_with_tool(const std::vector<AgentProfile>& assignees, const SubtaskSpec& subtask,
                         const ToolDescriptor& tool, const std::vector<kb::RetrievalResult>& knowledge,
                         const ScenarioSummary& summary);

// Highest-ranked feasible tool. Throws kNoFeasibleTool, kInvalidArgument for no assignees.
AgentPlan plan_subtask(const std::vector<AgentProfile>& assignees, const SubtaskSpec& subtask,
                       const std::vector<kb::RetrievalResult>& knowledge, const ToolRegistry& registry,
                       const ScenarioSummary& summary);

enum class Decision { kAccept, kRevise };
std::string decision_name(Decision d);

struct Deficiency {
  std::string criterion;  // metric name, or the budget key for a budget breach
  double observed = 0.0;  // NaN when the metric was not predicted
  double required = 0.0;

  bool operator==(const Deficiency&) const = default;
};

struct ReviewVerdict {
  Decision decision = Decision::kAccept;
  std::vector<Deficiency> deficiencies;
};

nlohmann::json to_json(const ReviewVerdict& verdict);

ReviewVerdict review_plan(const AgentPlan& plan, const SubtaskSpec& subtask, const ToolRegistry& registry);

struct PlanNegotiation {
  AgentPlan plan;
  std::vector<ReviewVerdict> verdicts;  // one per review round
  bool escalated = false;               // rounds ran out; best rejected plan kept
};

// Review loop: round r reviews the current plan; a revise verdict makes the
// specialists propose the next-ranked feasible tool. `initial` replaces the
// first proposal (used to inject a plan).
PlanNegotiation negotiate_plan(const std::vector<AgentProfile>& assignees, const SubtaskSpec& subtask,
                               const std::vector<kb::RetrievalResult>& knowledge, const ToolRegistry& registry,
                               const ScenarioSummary& summary, int max_rounds = 3,
                               const std::optional<AgentPlan>& initial = std::nullopt);

// review_plan on every plan plus cross-plan checks: estimator output_dim vs
// precoder input_dim, and ap-selection cardinality >= 1.
ReviewVerdict self_reflect(const TaskDAG& dag, const std::map<std::string, AgentPlan>& plans,
                           const ToolRegistry& registry);

struct FeedbackRecord {
  std::string user_id;
  ParamMap quantitative;
  int text_rating = 3;
  std::string text;
};

nlohmann::json to_json(const FeedbackRecord& record);

// Keyword rules mapping a sentence to 1..5; 3 when nothing matches.
int rate_feedback_text(const std::string& text);
// Canned sentence for a rating, consistent with rate_feedback_text.
std::string feedback_sentence(int rating);

struct MetricSummary {
  double mean = 0.0;
  std::size_t inliers = 0;
  std::size_t discarded = 0;
};

struct AggregatedFeedback {
  std::map<std::string, MetricSummary> metrics;
  double mean_text_rating = 0.0;
  std::size_t record_count = 0;

  double mean(const std::string& metric) const;
};

nlohmann::json to_json(const AggregatedFeedback& summary);

// Drop |x - median| > 3 MAD (nothing when MAD = 0), then mean. Throws kEmptyFeedback.
MetricSummary mad_filtered_mean(const std::vector<double>& values);
AggregatedFeedback aggregate_feedback(const std::vector<FeedbackRecord>& records);

struct Adjustment {
  int rung = 0;  // 1 grid, 2 precoder, 3 pilots
  std::string subtask_id;
  std::string key;  // param name, or "tool_id"
  std::string before;
  std::string after;

  std::string describe() const;
  bool operator==(const Adjustment&) const = default;
};

nlohmann::json to_json(const Adjustment& adjustment);

struct ReflectionHistory {
  std::set<int> tried_rungs;
  bool exhausted = false;
};

// Next untried applicable rung when the mean sum rate is below the threshold.
// Every proposal respects the subtask budgets. Sets history.exhausted when no
// rung is left.
std::vector<Adjustment> reflect(const AggregatedFeedback& summary, ReflectionHistory& history, const TaskDAG& dag,
                                double threshold);

TaskDAG apply_adjustment(const TaskDAG& dag, const Adjustment& adjustment);

// JSON-over-HTTP agent backend: POST {base}/v1/agent/act.
class RemoteBackend {
 public:
  explicit RemoteBackend(std::string base_url, int timeout_seconds = 5);

  // Throws kBackendUnavailable on transport failure, non-2xx, or malformed JSON.
  nlohmann::json act(const AgentProfile& agent, const std::string& operation, const nlohmann::json& payload,
                     const std::vector<kb::RetrievalResult>& context = {},
                     const std::vector<kb::RetrievalResult>& knowledge = {}) const;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  int timeout_seconds_;
};

nlohmann::json to_json(const kb::RetrievalResult& result);

}  // namespace nativeai::agents
