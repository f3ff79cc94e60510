#include "nativeai/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nativeai/error.hpp"

namespace nativeai {

using nlohmann::json;
using agents::AgentPlan;
using agents::AgentProfile;

namespace {

constexpr std::uint64_t kValidationSalt = 0x56414c4944ULL;
constexpr std::size_t kOutlierPeriod = 50;
constexpr double kOutlierFactor = 10.0;

// Remote agents, with a sticky switch to the scripted rules after the first failure.
class Backend {
 public:
  explicit Backend(const std::string& url) {
    if (!url.empty()) remote_.emplace(url);
  }

  std::optional<json> call(const AgentProfile& agent, const std::string& operation, const json& payload,
                           const std::vector<kb::RetrievalResult>& context,
                           const std::vector<kb::RetrievalResult>& knowledge) {
    if (!remote_) return std::nullopt;
    if (dead_) {
      fallbacks_.push_back(operation + ": scripted (backend unavailable)");
      return std::nullopt;
    }
    try {
      return remote_->act(agent, operation, payload, context, knowledge);
    } catch (const Error& e) {
      dead_ = true;
      fallbacks_.push_back(operation + ": scripted (" + e.detail() + ")");
      return std::nullopt;
    }
  }

  void reject(const std::string& operation, const std::string& why) {
    fallbacks_.push_back(operation + ": scripted (" + why + ")");
  }

  std::vector<std::string> take_fallbacks() { return std::move(fallbacks_); }

 private:
  std::optional<agents::RemoteBackend> remote_;
  bool dead_ = false;
  std::vector<std::string> fallbacks_;
};

const AgentProfile& supervisor_of(const std::vector<AgentProfile>& roster) {
  const auto it = std::find_if(roster.begin(), roster.end(),
                               [](const auto& a) { return a.role == agents::Role::kSupervisor; });
  if (it == roster.end()) throw Error(Errc::kInvalidArgument, "roster has no supervisor");
  return *it;
}

std::vector<std::string> expansions_for(Backend& backend, const AgentProfile& supervisor, const std::string& query,
                                        std::size_t n) {
  if (auto reply = backend.call(supervisor, "expand_query", {{"query", query}, {"n", n}}, {}, {})) {
    try {
      auto list = reply->at("expansions").get<std::vector<std::string>>();
      std::set<std::string> distinct(list.begin(), list.end());
      if (list.size() == n && distinct.size() == n && !distinct.contains(query)) return list;
      backend.reject("expand_query", "reply violates the expansion contract");
    } catch (const json::exception& e) {
      backend.reject("expand_query", e.what());
    }
  }
  return kb::expand_query(query, n);
}

TaskIntent intent_for(Backend& backend, const AgentProfile& supervisor, const std::string& query,
                      const std::map<std::string, std::string>& context,
                      const std::vector<kb::RetrievalResult>& knowledge) {
  if (auto reply = backend.call(supervisor, "identify_intent", {{"query", query}, {"context", context}}, knowledge, {})) {
    try {
      const auto kind = reply->at("kind");
      if (kind.is_null()) throw Error(Errc::kUnrecognizedIntent, query);
      if (kind.get<std::string>() == intent_kind_name(IntentKind::kMaximizeSumRate)) {
        TaskIntent intent;
        intent.raw_query = query;
        intent.target_metric = reply->value("target_metric", std::string("sum_rate_bps_hz"));
        if (auto it = context.find("target_metric"); it != context.end()) intent.target_metric = it->second;
        if (auto it = context.find("scenario_ref"); it != context.end()) intent.scenario_ref = it->second;
        return intent;
      }
      backend.reject("identify_intent", "unknown intent kind");
    } catch (const json::exception& e) {
      backend.reject("identify_intent", e.what());
    }
  }
  return agents::identify_intent(query, context);
}

std::optional<AgentPlan> remote_plan(Backend& backend, const std::vector<AgentProfile>& assignees,
                                     const SubtaskSpec& subtask, const ToolRegistry& registry,
                                     const ScenarioSummary& summary, const std::vector<kb::RetrievalResult>& knowledge) {
  json tools = json::array();
  for (const auto* t : agents::feasible_tools(subtask, registry)) {
    tools.push_back({{"tool_id", t->tool_id}, {"quality_rank", t->quality_rank}, {"default_params", t->default_params}});
  }
  json dag_view = to_json(build_dag({subtask}, {}));
  auto reply = backend.call(assignees.front(), "plan_subtask",
                            {{"subtask", dag_view.at("subtasks").at(0)}, {"tools", tools}}, knowledge, {});
  if (!reply) return std::nullopt;
  try {
    auto plan = agents::plan_from_json(*reply, subtask.id);
    const auto* tool = registry.find(plan.tool_id);
    if (tool == nullptr) {
      backend.reject("plan_subtask", "unknown tool " + plan.tool_id);
      return std::nullopt;
    }
    if (plan.predicted_metrics.empty() && tool->predictor) plan.predicted_metrics = tool->predictor(plan.params, summary);
    for (const auto& a : assignees) plan.contributors.push_back(a.agent_id);
    return plan;
  } catch (const Error& e) {
    backend.reject("plan_subtask", e.detail());
    return std::nullopt;
  }
}

std::string make_episode_id() {
  static std::atomic<std::uint64_t> counter{0};
  const auto now = std::chrono::system_clock::now().time_since_epoch().count();
  std::ostringstream out;
  out << "ep-" << std::hex << static_cast<std::uint64_t>(now) << "-" << counter++;
  return out.str();
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

OrchestrationResult orchestrate(const std::string& query, const phy::ScenarioConfig& config,
                                const std::vector<AgentProfile>& roster, const ToolRegistry& registry,
                                const kb::KnowledgeStore& store, const OrchestratorOptions& options) {
  phy::validate(config);
  const auto& supervisor = supervisor_of(roster);
  Backend backend(options.backend_url);
  OrchestrationResult out;

  out.expansions = expansions_for(backend, supervisor, query, options.expansions);
  out.vector_results = store.retrieve(query, out.expansions, options.top_k);
  if (!store.graphs().empty()) out.graph_results = store.graph_query(query, out.expansions, options.top_k);
  out.knowledge = kb::merge_results(out.vector_results, out.graph_results.results, options.top_k);

  out.intent = intent_for(backend, supervisor, query, options.context, out.knowledge);
  auto dag = agents::decompose(out.intent, config, options.decompose);
  const auto nodes = agents::scenario_nodes(config);
  for (const auto& s : dag.subtasks()) {
    const auto check = validate_subtask(s, nodes);
    if (!check.ok()) throw Error(Errc::kInvalidSubtask, s.id + ": " + violation_name(check.violations.front()));
  }
  out.team = agents::assemble_team(dag, roster);

  const auto summary = summarize(config);
  for (const auto& id : topological_order(dag)) {
    const auto& subtask = dag.subtask(id);
    std::vector<AgentProfile> assignees;
    for (const auto& agent_id : out.team.members.at(id)) {
      assignees.push_back(*std::find_if(roster.begin(), roster.end(),
                                        [&](const auto& a) { return a.agent_id == agent_id; }));
    }

    std::optional<AgentPlan> first;
    if (auto it = options.injected_plans.find(id); it != options.injected_plans.end()) {
      first = it->second;
    } else {
      first = remote_plan(backend, assignees, subtask, registry, summary, out.knowledge);
    }
    auto negotiation =
        agents::negotiate_plan(assignees, subtask, out.knowledge, registry, summary, options.max_review_rounds, first);

    ReviewRecord record;
    record.subtask_id = id;
    record.verdicts = negotiation.verdicts;
    record.escalated = negotiation.escalated;
    record.proposals.push_back(first ? *first : negotiation.plan);
    if (negotiation.escalated) out.escalations.push_back("review:" + id);
    out.reviews.push_back(std::move(record));

    auto updated = subtask;
    updated.tool_selection = ToolSelection{negotiation.plan.tool_id, negotiation.plan.params};
    dag = dag.with_subtask(updated);
    out.plans[id] = std::move(negotiation.plan);
  }

  out.self_check = agents::self_reflect(dag, out.plans, registry);
  if (out.self_check.decision == agents::Decision::kRevise) {
    for (const auto& d : out.self_check.deficiencies) out.escalations.push_back("self-reflection:" + d.criterion);
  }
  out.dag = std::move(dag);
  out.backend_fallbacks = backend.take_fallbacks();
  return out;
}

const phy::RateResult& Execution::rate() const {
  const phy::RateResult* found = nullptr;
  for (const auto& entry : trace) {
    const auto& out = outputs.at(entry.subtask_id);
    if (auto it = out.find(keys::kSumRate); it != out.end()) found = &std::get<phy::RateResult>(it->second);
  }
  if (found == nullptr) throw Error(Errc::kUpstreamMissingOutput, std::string("no subtask produced ") + keys::kSumRate);
  return *found;
}

Execution execute_dag(const TaskDAG& dag, const ExecContext& context, const ToolRegistry& registry) {
  Execution exec;
  const auto order = topological_order(dag);
  for (const auto& id : order) {
    const auto& subtask = dag.subtask(id);
    if (!subtask.tool_selection) throw Error(Errc::kInvalidArgument, id + " has no tool selection");
    const auto& selection = *subtask.tool_selection;
    const auto* tool = registry.find(selection.tool_id);
    if (tool == nullptr) throw Error(Errc::kUnknownTool, selection.tool_id);

    // Later ancestors in the order win when two publish the same key.
    ToolOutputs inputs;
    const auto ancestors = dag.ancestors(id);
    for (const auto& prior : order) {
      if (prior == id) break;
      if (!ancestors.contains(prior)) continue;
      for (const auto& [key, value] : exec.outputs.at(prior)) inputs.insert_or_assign(key, value);
    }
    for (const auto& key : tool->input_keys) {
      if (!inputs.contains(key)) throw Error(Errc::kUpstreamMissingOutput, tool->tool_id + " needs " + key);
    }

    TraceEntry entry{id, tool->tool_id, subtask.execution_node, selection.params, true, 0.0};
    for (const auto& [param, budget_key] : tool->param_budget_keys) {
      const auto value = selection.params.find(param);
      const auto budget = subtask.resource_constraints.find(budget_key);
      if (value != selection.params.end() && budget != subtask.resource_constraints.end() &&
          value->second > budget->second) {
        entry.within_budget = false;
      }
    }
    const auto start = std::chrono::steady_clock::now();
    exec.outputs[id] = tool->executor(context, selection.params, inputs);
    entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    exec.trace.push_back(std::move(entry));
  }
  return exec;
}

std::string scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::kMultiAgent:
      return "multi-agent";
    case Scheme::kSingleAgent:
      return "single-agent";
    case Scheme::kClassical:
      return "classical";
    case Scheme::kPerfectCsi:
      return "perfect-csi";
  }
  return "unknown";
}

std::optional<Scheme> parse_scheme(const std::string& name) {
  for (auto s : all_schemes()) {
    if (scheme_name(s) == name) return s;
  }
  return std::nullopt;
}

const std::vector<Scheme>& all_schemes() {
  static const std::vector<Scheme> schemes = {Scheme::kPerfectCsi, Scheme::kMultiAgent, Scheme::kSingleAgent,
                                              Scheme::kClassical};
  return schemes;
}

std::uint64_t drop_seed(std::uint64_t seed, std::size_t drop_index) { return phy::derive_seed(seed, drop_index); }
std::uint64_t validation_seed(std::uint64_t seed) { return phy::derive_seed(seed, kValidationSalt); }

double EpisodeReport::mean_rate() const { return mean_of(per_drop_rates); }

std::vector<agents::FeedbackRecord> synthesize_feedback(const std::vector<phy::RateResult>& rates) {
  const std::size_t n = rates.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rates[a].sum_rate < rates[b].sum_rate; });
  std::vector<int> quintile(n, 1);
  for (std::size_t rank = 0; rank < n; ++rank) {
    quintile[order[rank]] = static_cast<int>(std::min<std::size_t>(5, 1 + 5 * rank / n));
  }

  std::vector<agents::FeedbackRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    agents::FeedbackRecord r;
    r.user_id = "drop-" + std::to_string(i);
    const bool outlier = (i + 1) % kOutlierPeriod == 0;
    r.quantitative["sum_rate_bps_hz"] = rates[i].sum_rate * (outlier ? kOutlierFactor : 1.0);
    double sinr_db = 0.0;
    for (Eigen::Index u = 0; u < rates[i].sinr.size(); ++u) sinr_db += 10.0 * std::log10(std::max(rates[i].sinr(u), 1e-30));
    if (rates[i].sinr.size() > 0) r.quantitative["sinr_db"] = sinr_db / static_cast<double>(rates[i].sinr.size());
    r.text = agents::feedback_sentence(quintile[i]);
    r.text_rating = agents::rate_feedback_text(r.text);
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

struct DropRun {
  std::vector<phy::RateResult> rates;
  std::vector<std::string> order;
};

phy::RateResult run_on(const TaskDAG& dag, const phy::ScenarioConfig& config, const ToolRegistry& registry,
                       std::uint64_t seed, std::vector<std::string>* order = nullptr) {
  const auto realization = phy::generate_scenario(config, seed);
  // Cloud-to-edge handoff carries only the DAG text.
  const auto edge_dag = dag_from_json(json::parse(dag_to_string(dag)));
  const auto exec = execute_dag(edge_dag, ExecContext{config, realization}, registry);
  if (order != nullptr) {
    order->clear();
    for (const auto& t : exec.trace) order->push_back(t.subtask_id);
  }
  return exec.rate();
}

DropRun run_drops(const TaskDAG& dag, const phy::ScenarioConfig& config, const ToolRegistry& registry,
                  const std::vector<std::uint64_t>& seeds) {
  DropRun run;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    run.rates.push_back(run_on(dag, config, registry, seeds[i], i == 0 ? &run.order : nullptr));
  }
  return run;
}

std::vector<double> sum_rates(const std::vector<phy::RateResult>& rates) {
  std::vector<double> out;
  for (const auto& r : rates) out.push_back(r.sum_rate);
  return out;
}

EpisodeReport fixed_dag_episode(Scheme scheme, const TaskDAG& dag, const phy::ScenarioConfig& config,
                                const ToolRegistry& registry, std::size_t drops, std::uint64_t seed) {
  if (drops < 1) throw Error(Errc::kInvalidArgument, "drops must be at least 1");
  EpisodeReport report;
  report.episode_id = make_episode_id();
  report.scheme = scheme;
  report.seed = seed;
  report.config = config;
  report.dag = dag;
  for (std::size_t i = 0; i < drops; ++i) report.drop_seeds.push_back(drop_seed(seed, i));
  const auto run = run_drops(dag, config, registry, report.drop_seeds);
  report.per_drop_rates = sum_rates(run.rates);
  report.execution_order = run.order;
  report.feedback = synthesize_feedback(run.rates);
  report.aggregated = agents::aggregate_feedback(report.feedback);
  report.pre_reflection_mean = report.mean_rate();
  return report;
}

}  // namespace

EpisodeReport run_episode(const std::string& query, const phy::ScenarioConfig& config,
                          const std::vector<AgentProfile>& roster, const ToolRegistry& registry,
                          const kb::KnowledgeStore& store, std::size_t drops, std::uint64_t seed,
                          const OrchestratorOptions& options) {
  if (drops < 1) throw Error(Errc::kInvalidArgument, "drops must be at least 1");
  auto orchestration = orchestrate(query, config, roster, registry, store, options);
  auto report = fixed_dag_episode(Scheme::kMultiAgent, orchestration.dag, config, registry, drops, seed);
  report.scenario_ref = orchestration.intent.scenario_ref;
  report.store_options = store.options();
  report.options = options;
  report.backend_fallbacks = orchestration.backend_fallbacks;
  report.escalations = orchestration.escalations;

  const auto initial = report;
  const auto validation = validation_seed(seed);
  agents::ReflectionHistory history;
  TaskDAG dag = report.dag;
  while (true) {
    const auto adjustments = agents::reflect(report.aggregated, history, dag, options.reflection_threshold);
    if (adjustments.empty()) break;
    TaskDAG candidate = dag;
    for (const auto& a : adjustments) candidate = agents::apply_adjustment(candidate, a);

    ReflectionEvent event;
    event.adjustments = adjustments;
    event.validation_rate_before = run_on(dag, config, registry, validation).sum_rate;
    event.validation_rate_after = run_on(candidate, config, registry, validation).sum_rate;
    event.accepted = event.validation_rate_after > event.validation_rate_before;
    report.reflection_events.push_back(event);
    if (!event.accepted) continue;

    dag = candidate;
    const auto run = run_drops(dag, config, registry, report.drop_seeds);
    report.dag = dag;
    report.per_drop_rates = sum_rates(run.rates);
    report.execution_order = run.order;
    report.feedback = synthesize_feedback(run.rates);
    report.aggregated = agents::aggregate_feedback(report.feedback);
  }
  report.reflection_exhausted = history.exhausted;

  // A single validation drop can mislead; never report a reflected episode that
  // does worse than the one it started from.
  if (report.mean_rate() < initial.mean_rate()) {
    auto events = std::move(report.reflection_events);
    report = initial;
    report.reflection_events = std::move(events);
    report.reflection_exhausted = history.exhausted;
    report.rolled_back = true;
  }
  return report;
}

TaskDAG baseline_dag(Scheme scheme, const TaskDAG& framework_dag, const phy::ScenarioConfig& config,
                     const agents::DecomposeOptions& options) {
  const double pilot_budget = options.pilot_budget_factor * config.pilot_length_symbols;
  switch (scheme) {
    case Scheme::kMultiAgent:
      throw Error(Errc::kInvalidArgument, "multi-agent has no fixed DAG");
    case Scheme::kSingleAgent: {
      SubtaskSpec s;
      s.id = "hybrid-beamforming";
      s.description = "Monolithic agent: end-to-end hybrid analog-digital beamforming on LS estimates.";
      s.resource_constraints = {{"max_pilot_symbols", pilot_budget},
                                {"max_aps_per_user", static_cast<double>(config.num_aps)},
                                {"power_budget", config.tx_power_per_ap_w}};
      s.evaluation_criteria = {{"sum_rate_bps_hz", Comparator::kGreaterEqual, options.sum_rate_floor}};
      s.tool_selection = ToolSelection{"hybrid-e2e",
                                       {{"pilot_length", config.pilot_length_symbols},
                                        {"aps_per_user", config.ap_select_l},
                                        {"power_w", config.tx_power_per_ap_w}}};
      s.execution_node = options.execution_node;
      return build_dag({s}, {});
    }
    case Scheme::kClassical:
    case Scheme::kPerfectCsi: {
      std::vector<SubtaskSpec> subtasks;
      for (const auto& id : topological_order(framework_dag)) {
        if (id == "aoa-estimation") continue;
        auto s = framework_dag.subtask(id);
        if (id == "channel-estimation") {
          double pilots = config.pilot_length_symbols;
          if (s.tool_selection) pilots = param_or(s.tool_selection->params, "pilot_length", pilots);
          s.tool_selection = scheme == Scheme::kClassical ? ToolSelection{"ls-est", {{"pilot_length", pilots}}}
                                                          : ToolSelection{"genie-est", {}};
        }
        subtasks.push_back(std::move(s));
      }
      std::vector<Edge> edges;
      for (std::size_t i = 1; i < subtasks.size(); ++i) edges.emplace_back(subtasks[i - 1].id, subtasks[i].id);
      return build_dag(std::move(subtasks), std::move(edges));
    }
  }
  throw Error(Errc::kInvalidArgument, "unknown scheme");
}

EpisodeReport run_scheme(Scheme scheme, const phy::ScenarioConfig& config, std::size_t drops, std::uint64_t seed,
                         const kb::KnowledgeStore& store, const OrchestratorOptions& options,
                         const std::string& query) {
  const auto registry = default_registry(config);
  const auto roster = agents::default_roster();
  if (scheme == Scheme::kMultiAgent) {
    return run_episode(query, config, roster, registry, store, drops, seed, options);
  }
  std::vector<std::string> fallbacks;
  TaskDAG dag;
  if (scheme == Scheme::kSingleAgent) {
    dag = baseline_dag(scheme, {}, config, options.decompose);
  } else {
    // Baselines share the framework's selection and precoding stages.
    auto orchestration = orchestrate(query, config, roster, registry, store, options);
    fallbacks = orchestration.backend_fallbacks;
    dag = baseline_dag(scheme, orchestration.dag, config, options.decompose);
  }
  auto report = fixed_dag_episode(scheme, dag, config, registry, drops, seed);
  report.store_options = store.options();
  report.options = options;
  report.backend_fallbacks = std::move(fallbacks);
  if (auto it = options.context.find("scenario_ref"); it != options.context.end()) report.scenario_ref = it->second;
  return report;
}

json to_json(const EpisodeReport& r) {
  json feedback = json::array();
  for (const auto& f : r.feedback) feedback.push_back(agents::to_json(f));
  json events = json::array();
  for (const auto& e : r.reflection_events) {
    json adjustments = json::array();
    for (const auto& a : e.adjustments) adjustments.push_back(agents::to_json(a));
    events.push_back({{"adjustments", adjustments},
                      {"accepted", e.accepted},
                      {"validation_rate_before", e.validation_rate_before},
                      {"validation_rate_after", e.validation_rate_after}});
  }
  const auto& so = r.store_options;
  return {
      {"episode_id", r.episode_id},
      {"scenario_ref", r.scenario_ref},
      {"scheme", scheme_name(r.scheme)},
      {"seed", r.seed},
      {"drops", r.per_drop_rates.size()},
      {"config", phy::to_json(r.config)},
      {"constants",
       {{"chunk_tokens", so.chunk_tokens},
        {"group_threshold", so.group_threshold},
        {"cosine_weight", so.cosine_weight},
        {"path_edge_floor", so.path_edge_floor},
        {"cross_ref_saturation", so.cross_ref_saturation},
        {"expansions", r.options.expansions},
        {"top_k", r.options.top_k},
        {"max_review_rounds", r.options.max_review_rounds},
        {"reflection_threshold", r.options.reflection_threshold},
        {"sum_rate_floor", r.options.decompose.sum_rate_floor}}},
      {"dag", to_json(r.dag)},
      {"execution_order", r.execution_order},
      {"drop_seeds", r.drop_seeds},
      {"per_drop_rates", r.per_drop_rates},
      {"mean_rate", r.mean_rate()},
      {"pre_reflection_mean", r.pre_reflection_mean},
      {"feedback", feedback},
      {"aggregated_feedback", agents::to_json(r.aggregated)},
      {"reflection_events", events},
      {"reflection_exhausted", r.reflection_exhausted},
      {"rolled_back", r.rolled_back},
      {"backend_fallbacks", r.backend_fallbacks},
      {"escalations", r.escalations},
  };
}

std::string drops_csv(const EpisodeReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "drop_index,seed,scheme,sum_rate_bps_hz\n";
  for (std::size_t i = 0; i < r.per_drop_rates.size(); ++i) {
    out << i << ',' << r.drop_seeds[i] << ',' << scheme_name(r.scheme) << ',' << r.per_drop_rates[i] << '\n';
  }
  return out.str();
}

}  // namespace nativeai
