#include "nativeai/agent_core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "httplib.h"
#include "nativeai/error.hpp"

namespace nativeai::agents {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string role_name(Role role) { return role == Role::kSupervisor ? "supervisor" : "specialist"; }
std::string backend_name(BackendKind kind) { return kind == BackendKind::kScripted ? "scripted" : "remote"; }

std::vector<AgentProfile> default_roster() {
  return {
      {"supervisor", Role::kSupervisor, {}, "Decomposes user intents into task DAGs and reviews specialist plans.",
       BackendKind::kScripted, {}},
      {"aoa-specialist", Role::kSpecialist, {"aoa-estimation"},
       "Estimates user angles of arrival at each access point array for positioning.", BackendKind::kScripted, {}},
      {"optimization-specialist", Role::kSpecialist, {"ap-selection"},
       "Formulates and solves access point selection and downlink transmission problems.", BackendKind::kScripted, {}},
      {"precoding-specialist", Role::kSpecialist, {"channel-estimation", "precoding"},
       "Linear algebra and precoding: channel estimation and digital beamforming.", BackendKind::kScripted, {}},
  };
}

TaskIntent identify_intent(const std::string& query, const std::map<std::string, std::string>& context) {
  if (query.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(Errc::kInvalidArgument, "query is empty");
  }
  static const std::vector<std::string> kSumRateKeywords = {
      "sum rate", "sum-rate", "throughput", "maximize", "maximise", "optimiz", "optimis", "performance",
      "spectral efficiency"};
  const auto text = lowercase(query);
  const bool hit = std::any_of(kSumRateKeywords.begin(), kSumRateKeywords.end(),
                               [&](const std::string& k) { return text.find(k) != std::string::npos; });
  if (!hit) throw Error(Errc::kUnrecognizedIntent, query);

  TaskIntent intent;
  intent.kind = IntentKind::kMaximizeSumRate;
  intent.target_metric = "sum_rate_bps_hz";
  intent.raw_query = query;
  if (auto it = context.find("target_metric"); it != context.end()) intent.target_metric = it->second;
  if (auto it = context.find("scenario_ref"); it != context.end()) intent.scenario_ref = it->second;
  return intent;
}

std::set<std::string> scenario_nodes(const phy::ScenarioConfig&) { return {"cloud", "edge-0"}; }

TaskDAG decompose(const TaskIntent& intent, const phy::ScenarioConfig& config, const DecomposeOptions& options) {
  if (intent.kind != IntentKind::kMaximizeSumRate) {
    throw Error(Errc::kUnsupportedIntent, std::to_string(static_cast<int>(intent.kind)));
  }
  const double pilot_budget = options.pilot_budget_factor * config.pilot_length_symbols;
  const auto& node = options.execution_node;
  const std::string metric = intent.target_metric.empty() ? "sum_rate_bps_hz" : intent.target_metric;

  std::vector<SubtaskSpec> subtasks = {
      {"aoa-estimation",
       "Estimate each user's angle of arrival at every AP array from uplink pilot snapshots.",
       {{"max_grid_points", options.max_grid_points}, {"max_pilot_symbols", pilot_budget}},
       {{"angle_resolution_rad", Comparator::kLessEqual, std::numbers::pi / 128.0}},
       std::nullopt,
       node},
      {"channel-estimation",
       "Estimate the per-AP downlink channel vectors for every user.",
       {{"max_pilot_symbols", pilot_budget}},
       {{"nmse_db", Comparator::kLessEqual, 0.0}},
       std::nullopt,
       node},
      {"ap-selection",
       "Choose the serving access points for each user.",
       {{"max_aps_per_user", static_cast<double>(config.num_aps)}},
       {{"aps_per_user", Comparator::kGreaterEqual, 1.0}},
       std::nullopt,
       node},
      {"precoding",
       "Compute downlink beamformers and power allocation over the serving APs.",
       {{"power_budget", config.tx_power_per_ap_w}},
       {{metric, Comparator::kGreaterEqual, options.sum_rate_floor}},
       std::nullopt,
       node},
  };
  return build_dag(std::move(subtasks), {{"aoa-estimation", "channel-estimation"},
                                         {"channel-estimation", "ap-selection"},
                                         {"ap-selection", "precoding"}});
}

const std::string& capability_of(const SubtaskSpec& subtask) { return subtask.id; }

TeamAssignment assemble_team(const TaskDAG& dag, const std::vector<AgentProfile>& roster) {
  TeamAssignment team;
  for (const auto& id : topological_order(dag)) {
    const auto& tag = capability_of(dag.subtask(id));
    std::vector<std::string> members;
    for (const auto& agent : roster) {
      if (agent.role == Role::kSpecialist && agent.capabilities.contains(tag)) members.push_back(agent.agent_id);
    }
    if (members.empty()) throw Error(Errc::kNoCapableSpecialist, id);
    if (members.size() > 1) team.joint.insert(id);
    team.members[id] = std::move(members);
  }
  return team;
}

json to_json(const AgentPlan& plan) {
  json predicted = json::object();
  for (const auto& [k, v] : plan.predicted_metrics) predicted[k] = number_or_null(v);
  return {{"subtask_id", plan.subtask_id},   {"tool_id", plan.tool_id},     {"params", plan.params},
          {"predicted_metrics", predicted},  {"rationale", plan.rationale}, {"contributors", plan.contributors}};
}

AgentPlan plan_from_json(const json& j, const std::string& subtask_id) {
  try {
    AgentPlan plan;
    plan.subtask_id = subtask_id;
    plan.tool_id = j.at("tool_id").get<std::string>();
    plan.params = j.value("params", ParamMap{});
    plan.predicted_metrics = j.value("predicted_metrics", ParamMap{});
    plan.rationale = j.value("rationale", std::string{});
    return plan;
  } catch (const json::exception& e) {
    throw Error(Errc::kParseError, e.what());
  }
}

std::vector<const ToolDescriptor*> feasible_tools(const SubtaskSpec& subtask, const ToolRegistry& registry) {
  std::vector<const ToolDescriptor*> out;
  for (const auto* tool : registry.by_capability(capability_of(subtask), true)) {
    bool fits = true;
    for (const auto& [param, budget_key] : tool->param_budget_keys) {
      const auto budget = subtask.resource_constraints.find(budget_key);
      const auto minimum = tool->min_params.find(param);
      if (budget != subtask.resource_constraints.end() && minimum != tool->min_params.end() &&
          minimum->second > budget->second) {
        fits = false;
      }
    }
    if (fits) out.push_back(tool);
  }
  return out;
}

AgentPlan plan_with_tool(const std::vector<AgentProfile>& assignees, const SubtaskSpec& subtask,
                         const ToolDescriptor& tool, const std::vector<kb::RetrievalResult>& knowledge,
                         const ScenarioSummary& summary) {
  AgentPlan plan;
  plan.subtask_id = subtask.id;
  plan.tool_id = tool.tool_id;

  // Each specialist caps the defaults by its own preferences; the joint plan keeps
  // the element-wise minimum, which is the cap by the smallest preference.
  plan.params = tool.default_params;
  for (const auto& agent : assignees) {
    for (auto& [param, value] : plan.params) {
      if (auto pref = agent.param_preferences.find(param); pref != agent.param_preferences.end()) {
        value = std::min(value, pref->second);
      }
    }
    plan.contributors.push_back(agent.agent_id);
  }
  for (auto& [param, value] : plan.params) {
    if (auto minimum = tool.min_params.find(param); minimum != tool.min_params.end()) {
      value = std::max(value, minimum->second);
    }
    if (auto budget_key = tool.param_budget_keys.find(param); budget_key != tool.param_budget_keys.end()) {
      if (auto budget = subtask.resource_constraints.find(budget_key->second);
          budget != subtask.resource_constraints.end()) {
        value = std::min(value, budget->second);
      }
    }
  }
  if (tool.predictor) plan.predicted_metrics = tool.predictor(plan.params, summary);

  std::ostringstream why;
  why << tool.tool_id << " (rank " << tool.quality_rank << ") for " << tool.capability;
  if (!knowledge.empty()) {
    why << "; context";
    for (std::size_t i = 0; i < knowledge.size() && i < 3; ++i) why << ' ' << knowledge[i].chunk.chunk_id;
  }
  plan.rationale = why.str();
  return plan;
}

AgentPlan plan_subtask(const std::vector<AgentProfile>& assignees, const SubtaskSpec& subtask,
                       const std::vector<kb::RetrievalResult>& knowledge, const ToolRegistry& registry,
                       const ScenarioSummary& summary) {
  if (assignees.empty()) throw Error(Errc::kInvalidArgument, "no assignees for " + subtask.id);
  const auto tools = feasible_tools(subtask, registry);
  if (tools.empty()) throw Error(Errc::kNoFeasibleTool, subtask.id);
  return plan_with_tool(assignees, subtask, *tools.front(), knowledge, summary);
}

std::string decision_name(Decision d) { return d == Decision::kAccept ? "accept" : "revise"; }

json to_json(const ReviewVerdict& verdict) {
  json deficiencies = json::array();
  for (const auto& d : verdict.deficiencies) {
    deficiencies.push_back(
        {{"criterion", d.criterion}, {"observed", number_or_null(d.observed)}, {"required", number_or_null(d.required)}});
  }
  return {{"decision", decision_name(verdict.decision)}, {"deficiencies", deficiencies}};
}

ReviewVerdict review_plan(const AgentPlan& plan, const SubtaskSpec& subtask, const ToolRegistry& registry) {
  ReviewVerdict verdict;
  for (const auto& c : subtask.evaluation_criteria) {
    const auto it = plan.predicted_metrics.find(c.metric);
    if (it == plan.predicted_metrics.end()) {
      verdict.deficiencies.push_back({c.metric, kNaN, c.threshold});
    } else if (!compare(it->second, c.op, c.threshold)) {
      verdict.deficiencies.push_back({c.metric, it->second, c.threshold});
    }
  }
  const auto* tool = registry.find(plan.tool_id);
  if (tool == nullptr) {
    verdict.deficiencies.push_back({"tool_id", kNaN, kNaN});
  } else {
    for (const auto& [param, budget_key] : tool->param_budget_keys) {
      const auto value = plan.params.find(param);
      const auto budget = subtask.resource_constraints.find(budget_key);
      if (value != plan.params.end() && budget != subtask.resource_constraints.end() &&
          !(value->second <= budget->second)) {
        verdict.deficiencies.push_back({budget_key, value->second, budget->second});
      }
    }
  }
  verdict.decision = verdict.deficiencies.empty() ? Decision::kAccept : Decision::kRevise;
  return verdict;
}

PlanNegotiation negotiate_plan(const std::vector<AgentProfile>& assignees, const SubtaskSpec& subtask,
                               const std::vector<kb::RetrievalResult>& knowledge, const ToolRegistry& registry,
                               const ScenarioSummary& summary, int max_rounds, const std::optional<AgentPlan>& initial) {
  if (assignees.empty()) throw Error(Errc::kInvalidArgument, "no assignees for " + subtask.id);
  const auto candidates = feasible_tools(subtask, registry);
  std::size_t next = 0;
  AgentPlan plan;
  if (initial) {
    plan = *initial;
  } else {
    if (candidates.empty()) throw Error(Errc::kNoFeasibleTool, subtask.id);
    plan = plan_with_tool(assignees, subtask, *candidates[next++], knowledge, summary);
  }

  PlanNegotiation out;
  std::optional<AgentPlan> best;
  std::size_t best_count = 0;
  for (int round = 1; round <= std::max(1, max_rounds); ++round) {
    auto verdict = review_plan(plan, subtask, registry);
    out.verdicts.push_back(verdict);
    if (verdict.decision == Decision::kAccept) {
      out.plan = std::move(plan);
      return out;
    }
    if (!best || verdict.deficiencies.size() < best_count) {
      best = plan;
      best_count = verdict.deficiencies.size();
    }
    if (round == max_rounds || next >= candidates.size()) break;
    plan = plan_with_tool(assignees, subtask, *candidates[next++], knowledge, summary);
  }
  out.plan = std::move(*best);
  out.escalated = true;
  return out;
}

ReviewVerdict self_reflect(const TaskDAG& dag, const std::map<std::string, AgentPlan>& plans,
                           const ToolRegistry& registry) {
  ReviewVerdict verdict;
  auto add = [&](Deficiency d) {
    if (std::find(verdict.deficiencies.begin(), verdict.deficiencies.end(), d) == verdict.deficiencies.end()) {
      verdict.deficiencies.push_back(std::move(d));
    }
  };
  for (const auto& subtask : dag.subtasks()) {
    const auto it = plans.find(subtask.id);
    if (it == plans.end()) {
      add({"plan:" + subtask.id, kNaN, kNaN});
      continue;
    }
    for (auto& d : review_plan(it->second, subtask, registry).deficiencies) add(std::move(d));
  }

  auto metric = [&](const std::string& id, const std::string& key) -> std::optional<double> {
    const auto it = plans.find(id);
    if (it == plans.end()) return std::nullopt;
    if (auto m = it->second.predicted_metrics.find(key); m != it->second.predicted_metrics.end()) return m->second;
    if (auto p = it->second.params.find(key); p != it->second.params.end()) return p->second;
    return std::nullopt;
  };
  const auto emitted = metric("channel-estimation", "output_dim");
  const auto expected = metric("precoding", "input_dim");
  if (emitted && expected && *emitted != *expected) add({"dimension", *emitted, *expected});
  if (dag.contains("ap-selection")) {
    const auto cardinality = metric("ap-selection", "aps_per_user");
    if (!cardinality || *cardinality < 1.0) add({"aps_per_user", cardinality.value_or(kNaN), 1.0});
  }
  verdict.decision = verdict.deficiencies.empty() ? Decision::kAccept : Decision::kRevise;
  return verdict;
}

json to_json(const FeedbackRecord& r) {
  return {{"user_id", r.user_id}, {"quantitative", r.quantitative}, {"text_rating", r.text_rating}, {"text", r.text}};
}

int rate_feedback_text(const std::string& text) {
  static const std::vector<std::pair<int, std::vector<std::string>>> kRules = {
      {1, {"terrible", "unusable", "awful", "dropped"}},
      {5, {"excellent", "outstanding", "perfect", "instantly"}},
      {2, {"slow", "laggy", "buffering", "poor"}},
      {4, {"good", "fast", "smooth"}},
      {3, {"okay", "ok", "acceptable", "fine"}},
  };
  const auto words = kb::tokenize(text);
  for (const auto& [rating, keywords] : kRules) {
    for (const auto& k : keywords) {
      if (std::find(words.begin(), words.end(), k) != words.end()) return rating;
    }
  }
  return 3;
}

std::string feedback_sentence(int rating) {
  switch (std::clamp(rating, 1, 5)) {
    case 5:
      return "Excellent connection, pages load instantly.";
    case 4:
      return "Good speed for most of the session.";
    case 3:
      return "Okay, acceptable quality.";
    case 2:
      return "Slow at times with some buffering.";
    default:
      return "Terrible link, basically unusable.";
  }
}

double AggregatedFeedback::mean(const std::string& metric) const {
  const auto it = metrics.find(metric);
  return it == metrics.end() ? kNaN : it->second.mean;
}

json to_json(const AggregatedFeedback& s) {
  json metrics = json::object();
  for (const auto& [name, m] : s.metrics) {
    metrics[name] = {{"mean", number_or_null(m.mean)}, {"inliers", m.inliers}, {"discarded", m.discarded}};
  }
  return {{"metrics", metrics}, {"mean_text_rating", s.mean_text_rating}, {"record_count", s.record_count}};
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MetricSummary mad_filtered_mean(const std::vector<double>& values) {
  if (values.empty()) throw Error(Errc::kEmptyFeedback, "no values");
  const double med = median_of(values);
  std::vector<double> deviations;
  for (double x : values) deviations.push_back(std::abs(x - med));
  const double mad = median_of(deviations);

  MetricSummary s;
  double total = 0.0;
  for (double x : values) {
    if (mad > 0.0 && std::abs(x - med) > 3.0 * mad) {
      ++s.discarded;
    } else {
      total += x;
      ++s.inliers;
    }
  }
  s.mean = total / static_cast<double>(s.inliers);
  return s;
}

AggregatedFeedback aggregate_feedback(const std::vector<FeedbackRecord>& records) {
  if (records.empty()) throw Error(Errc::kEmptyFeedback, "no feedback records");
  std::map<std::string, std::vector<double>> columns;
  double ratings = 0.0;
  for (const auto& r : records) {
    for (const auto& [name, value] : r.quantitative) columns[name].push_back(value);
    ratings += r.text_rating;
  }
  AggregatedFeedback out;
  for (const auto& [name, values] : columns) out.metrics[name] = mad_filtered_mean(values);
  out.mean_text_rating = ratings / static_cast<double>(records.size());
  out.record_count = records.size();
  return out;
}

std::string Adjustment::describe() const {
  return subtask_id + "." + key + ": " + before + " -> " + after;
}

json to_json(const Adjustment& a) {
  return {{"rung", a.rung}, {"subtask_id", a.subtask_id}, {"key", a.key}, {"before", a.before}, {"after", a.after}};
}

namespace {

double budget_or_inf(const SubtaskSpec& s, const std::string& key) {
  const auto it = s.resource_constraints.find(key);
  return it == s.resource_constraints.end() ? std::numeric_limits<double>::infinity() : it->second;
}

std::vector<Adjustment> ladder_rung(int rung, const TaskDAG& dag) {
  std::vector<Adjustment> out;
  for (const auto& id : topological_order(dag)) {
    const auto& s = dag.subtask(id);
    if (!s.tool_selection) continue;
    const auto& params = s.tool_selection->params;
    if (rung == 1 || rung == 3) {
      const std::string key = rung == 1 ? "grid_points" : "pilot_length";
      const std::string budget_key = rung == 1 ? "max_grid_points" : "max_pilot_symbols";
      const auto it = params.find(key);
      if (it == params.end()) continue;
      const double after = std::min(2.0 * it->second, budget_or_inf(s, budget_key));
      if (after > it->second) out.push_back({rung, id, key, format_number(it->second), format_number(after)});
      if (rung == 1 && !out.empty()) break;  // one AoA stage
    } else if (rung == 2 && s.tool_selection->tool_id == "mrt") {
      out.push_back({rung, id, "tool_id", "mrt", "zf"});
    }
  }
  return out;
}

}  // namespace

std::vector<Adjustment> reflect(const AggregatedFeedback& summary, ReflectionHistory& history, const TaskDAG& dag,
                                double threshold) {
  const double mean = summary.mean("sum_rate_bps_hz");
  if (!(mean < threshold)) return {};
  for (int rung = 1; rung <= 3; ++rung) {
    if (history.tried_rungs.contains(rung)) continue;
    history.tried_rungs.insert(rung);
    auto proposals = ladder_rung(rung, dag);
    if (!proposals.empty()) return proposals;
  }
  history.exhausted = true;
  return {};
}

TaskDAG apply_adjustment(const TaskDAG& dag, const Adjustment& a) {
  auto s = dag.subtask(a.subtask_id);
  if (!s.tool_selection) throw Error(Errc::kInvalidArgument, a.subtask_id + " has no tool selection");
  if (a.key == "tool_id") {
    s.tool_selection->tool_id = a.after;
  } else {
    s.tool_selection->params[a.key] = std::stod(a.after);
  }
  return dag.with_subtask(s);
}

json to_json(const kb::RetrievalResult& r) {
  return {{"chunk_id", r.chunk.chunk_id}, {"text", r.chunk.text},
          {"metadata", r.chunk.metadata}, {"score", r.score},
          {"cosine", r.cosine},           {"provenance", kb::provenance_name(r.provenance)}};
}

RemoteBackend::RemoteBackend(std::string base_url, int timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

json RemoteBackend::act(const AgentProfile& agent, const std::string& operation, const json& payload,
                        const std::vector<kb::RetrievalResult>& context,
                        const std::vector<kb::RetrievalResult>& knowledge) const {
  json chunks = json::array();
  for (const auto& r : context) chunks.push_back(to_json(r));
  json results = json::array();
  for (const auto& r : knowledge) results.push_back(to_json(r));
  const json body = {{"agent_id", agent.agent_id}, {"role", role_name(agent.role)},
                     {"operation", operation},     {"payload", payload},
                     {"context", chunks},          {"knowledge", results}};

  httplib::Client client(base_url_);
  if (!client.is_valid()) throw Error(Errc::kBackendUnavailable, "invalid backend url " + base_url_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  const auto res = client.Post("/v1/agent/act", body.dump(), "application/json");
  if (!res) throw Error(Errc::kBackendUnavailable, base_url_ + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw Error(Errc::kBackendUnavailable, base_url_ + ": HTTP " + std::to_string(res->status));
  }
  try {
    auto reply = json::parse(res->body);
    if (!reply.is_object()) throw Error(Errc::kBackendUnavailable, "reply is not a JSON object");
    return reply;
  } catch (const json::exception& e) {
    throw Error(Errc::kBackendUnavailable, std::string("malformed reply: ") + e.what());
  }
}

}  // namespace nativeai::agents
