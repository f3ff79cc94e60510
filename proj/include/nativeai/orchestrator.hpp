#pragma once

// Episode state machine: expansion and retrieval, supervisor/specialist
// planning to a finalized DAG, edge execution over channel drops, feedback,
// and validation-gated reflection.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nativeai/agent_core.hpp"
#include "nativeai/knowledge_store.hpp"
#include "nativeai/phy_sim.hpp"
#include "nativeai/task_model.hpp"
#include "nativeai/toolkit.hpp"

namespace nativeai {

inline constexpr const char* kCaseStudyQuery = "Optimizing system performance for multiple users";

struct OrchestratorOptions {
  std::size_t expansions = 3;
  std::size_t top_k = 5;
  int max_review_rounds = 3;
  agents::DecomposeOptions decompose;
  std::map<std::string, std::string> context;  // passed to identify_intent
  std::string backend_url;                     // empty: scripted agents only
  double reflection_threshold = 0.0;           // 0 disables reflection
  // Replaces the first proposal for a subtask; used to exercise the review loop.
  std::map<std::string, agents::AgentPlan> injected_plans;
};

struct ReviewRecord {
  std::string subtask_id;
  std::vector<agents::AgentPlan> proposals;
  std::vector<agents::ReviewVerdict> verdicts;
  bool escalated = false;
};

struct OrchestrationResult {
  TaskIntent intent;
  std::vector<std::string> expansions;
  std::vector<kb::RetrievalResult> vector_results;
  kb::GraphQueryResult graph_results;
  std::vector<kb::RetrievalResult> knowledge;  // merged, deduplicated
  agents::TeamAssignment team;
  std::map<std::string, agents::AgentPlan> plans;
  std::vector<ReviewRecord> reviews;
  agents::ReviewVerdict self_check;
  TaskDAG dag;
  std::vector<std::string> backend_fallbacks;
  std::vector<std::string> escalations;
};

// Throws kUnrecognizedIntent, kNoCapableSpecialist, kNoFeasibleTool; escalations are recorded.
OrchestrationResult orchestrate(const std::string& query, const phy::ScenarioConfig& config,
                                const std::vector<agents::AgentProfile>& roster, const ToolRegistry& registry,
                                const kb::KnowledgeStore& store, const OrchestratorOptions& options = {});

struct TraceEntry {
  std::string subtask_id;
  std::string tool_id;
  std::string node;
  ParamMap params;
  bool within_budget = true;
  double wall_ms = 0.0;
};

struct Execution {
  std::map<std::string, ToolOutputs> outputs;  // per subtask id
  std::vector<TraceEntry> trace;

  // Rate from the last subtask (topological order) that produced one. Throws kUpstreamMissingOutput.
  const phy::RateResult& rate() const;
};

// Throws kUnknownTool, kUpstreamMissingOutput, kInvalidArgument (missing tool selection).
Execution execute_dag(const TaskDAG& dag, const ExecContext& context, const ToolRegistry& registry);

enum class Scheme { kMultiAgent, kSingleAgent, kClassical, kPerfectCsi };
std::string scheme_name(Scheme scheme);
std::optional<Scheme> parse_scheme(const std::string& name);
const std::vector<Scheme>& all_schemes();

std::uint64_t drop_seed(std::uint64_t seed, std::size_t drop_index);
std::uint64_t validation_seed(std::uint64_t seed);

struct ReflectionEvent {
  std::vector<agents::Adjustment> adjustments;
  bool accepted = false;
  double validation_rate_before = 0.0;
  double validation_rate_after = 0.0;
};

struct EpisodeReport {
  std::string episode_id;
  std::string scenario_ref;
  Scheme scheme = Scheme::kMultiAgent;
  std::uint64_t seed = 0;
  phy::ScenarioConfig config;
  kb::StoreOptions store_options;
  OrchestratorOptions options;
  TaskDAG dag;
  std::vector<std::uint64_t> drop_seeds;
  std::vector<double> per_drop_rates;
  std::vector<std::string> execution_order;
  std::vector<agents::FeedbackRecord> feedback;
  agents::AggregatedFeedback aggregated;
  double pre_reflection_mean = 0.0;
  std::vector<ReflectionEvent> reflection_events;
  bool reflection_exhausted = false;
  bool rolled_back = false;  // reflected DAG lost on the full drop set; initial DAG kept
  std::vector<std::string> backend_fallbacks;
  std::vector<std::string> escalations;

  double mean_rate() const;
};

// Feedback for one episode: quintile rating through the text rule, x10 outlier on every 50th drop.
std::vector<agents::FeedbackRecord> synthesize_feedback(const std::vector<phy::RateResult>& rates);

EpisodeReport run_episode(const std::string& query, const phy::ScenarioConfig& config,
                          const std::vector<agents::AgentProfile>& roster, const ToolRegistry& registry,
                          const kb::KnowledgeStore& store, std::size_t drops, std::uint64_t seed,
                          const OrchestratorOptions& options = {});

// DAG a baseline scheme executes. Multi-agent is not a fixed DAG and is rejected.
TaskDAG baseline_dag(Scheme scheme, const TaskDAG& framework_dag, const phy::ScenarioConfig& config,
                     const agents::DecomposeOptions& options = {});

EpisodeReport run_scheme(Scheme scheme, const phy::ScenarioConfig& config, std::size_t drops, std::uint64_t seed,
                         const kb::KnowledgeStore& store, const OrchestratorOptions& options = {},
                         const std::string& query = kCaseStudyQuery);

// Wall times are left out so repeated runs serialize identically apart from episode_id.
nlohmann::json to_json(const EpisodeReport& report);
// drop_index,seed,scheme,sum_rate_bps_hz
std::string drops_csv(const EpisodeReport& report);

}  // namespace nativeai
