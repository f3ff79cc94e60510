#include <cmath>
#include <thread>

#include "doctest.h"
#include "nativeai/error.hpp"
#include "nativeai/orchestrator.hpp"

#include "httplib.h"

using namespace nativeai;

namespace {

Errc error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected nativeai::Error");
  return Errc::kInvalidArgument;
}

ToolDescriptor bare(const std::string& id, const std::string& cap, int rank) {
  ToolDescriptor t;
  t.tool_id = id;
  t.capability = cap;
  t.quality_rank = rank;
  return t;
}

std::set<std::string> tool_ids(const TaskDAG& dag) {
  std::set<std::string> out;
  for (const auto& s : dag.subtasks()) out.insert(s.tool_selection->tool_id);
  return out;
}

nlohmann::json without_id(const EpisodeReport& r) {
  auto j = to_json(r);
  j.erase("episode_id");
  return j;
}

const kb::KnowledgeStore& store() {
  static const auto s = kb::default_knowledge_store();
  return s;
}

}  // namespace

TEST_CASE("register_tool examples") {
  ToolRegistry reg;
  reg.register_tool(bare("zf", "precoding", 2));
  REQUIRE(reg.by_capability("precoding").size() == 1);
  CHECK(reg.by_capability("precoding")[0]->tool_id == "zf");
  reg.register_tool(bare("mrt", "precoding", 1));
  const auto ordered = reg.by_capability("precoding");
  CHECK(ordered[0]->tool_id == "zf");
  CHECK(ordered[1]->tool_id == "mrt");
  CHECK(reg.find("mrt") != nullptr);
  CHECK(reg.find("nope") == nullptr);
  CHECK(error_code([&] { reg.register_tool(bare("zf", "precoding", 9)); }) == Errc::kDuplicateTool);
  CHECK(error_code([&] { reg.register_tool(bare("neg", "precoding", -1)); }) == Errc::kInvalidArgument);
  CHECK(reg.size() == 2);
}

TEST_CASE("default registry ranks and visibility") {
  const auto reg = default_registry(phy::scenario_a());
  CHECK(reg.size() == 8);
  CHECK(reg.by_capability("precoding")[0]->tool_id == "zf");
  CHECK(reg.by_capability("channel-estimation", true).size() == 2);
  CHECK(reg.by_capability("channel-estimation").size() == 3);
  CHECK(reg.by_capability("channel-estimation")[0]->tool_id == "aoa-assisted-est");
  CHECK(reg.by_capability("hybrid-beamforming", true).empty());

  auto mrt_cfg = phy::scenario_a();
  mrt_cfg.precoder = phy::PrecoderKind::kMrt;
  CHECK(default_registry(mrt_cfg).by_capability("precoding")[0]->tool_id == "mrt");

  ToolOutputs empty;
  CHECK(error_code([&] { tool_input<phy::ChannelSet>(empty, keys::kChannelEstimates, "zf"); }) ==
        Errc::kUpstreamMissingOutput);
  const auto s = summarize(phy::scenario_a());
  CHECK(s.num_aps == 5);
  CHECK(s.median_beta > 0);
}

TEST_CASE("orchestrate: case-study DAG") {
  const auto cfg = phy::scenario_a();
  const auto reg = default_registry(cfg);
  const auto result = orchestrate(kCaseStudyQuery, cfg, agents::default_roster(), reg, store());
  CHECK(topological_order(result.dag) ==
        std::vector<std::string>{"aoa-estimation", "channel-estimation", "ap-selection", "precoding"});
  CHECK(result.dag.edges().size() == 3);
  CHECK(tool_ids(result.dag) == std::set<std::string>{"aoa-grid", "aoa-assisted-est", "top-l-select", "zf"});
  CHECK(result.expansions.size() == 3);
  CHECK(result.vector_results.size() <= 5);
  CHECK_FALSE(result.knowledge.empty());
  CHECK(result.escalations.empty());
  CHECK(result.backend_fallbacks.empty());
  CHECK(result.self_check.decision == agents::Decision::kAccept);
  for (const auto& r : result.reviews) CHECK(r.verdicts.size() <= 3);

  const auto again = orchestrate(kCaseStudyQuery, cfg, agents::default_roster(), reg, store());
  CHECK(dag_to_string(again.dag) == dag_to_string(result.dag));

  const auto b = orchestrate(kCaseStudyQuery, phy::scenario_b(), agents::default_roster(), default_registry(phy::scenario_b()), store());
  CHECK(b.dag.subtasks().size() == 4);
  CHECK(b.dag.subtask("ap-selection").tool_selection->params.at("aps_per_user") == 1);
}

TEST_CASE("orchestrate: error paths") {
  const auto cfg = phy::scenario_a();
  const auto reg = default_registry(cfg);
  const auto roster = agents::default_roster();
  CHECK(error_code([&] { orchestrate(kCaseStudyQuery, cfg, {roster[0]}, reg, store()); }) == Errc::kNoCapableSpecialist);
  CHECK(error_code([&] { orchestrate(kCaseStudyQuery, cfg, {roster[1], roster[2], roster[3]}, reg, store()); }) ==
        Errc::kInvalidArgument);
  CHECK(error_code([&] { orchestrate("please order a pizza", cfg, roster, reg, store()); }) ==
        Errc::kUnrecognizedIntent);
  CHECK(error_code([&] { orchestrate(kCaseStudyQuery, cfg, roster, ToolRegistry{}, store()); }) ==
        Errc::kNoFeasibleTool);
  // An empty store still orchestrates: retrieval just comes back empty.
  const auto empty = orchestrate(kCaseStudyQuery, cfg, roster, reg, kb::KnowledgeStore{});
  CHECK(empty.knowledge.empty());
  CHECK(empty.dag.subtasks().size() == 4);
}

TEST_CASE("orchestrate: injected violating plan is revised") {
  const auto cfg = phy::scenario_a();
  OrchestratorOptions opts;
  opts.injected_plans["precoding"] =
      agents::AgentPlan{"precoding", "mrt", {{"power_w", cfg.tx_power_per_ap_w}}, {{"sum_rate_bps_hz", 0.1}}, "", {"x"}};
  const auto result = orchestrate(kCaseStudyQuery, cfg, agents::default_roster(), default_registry(cfg), store(), opts);
  const auto it = std::find_if(result.reviews.begin(), result.reviews.end(),
                               [](const auto& r) { return r.subtask_id == "precoding"; });
  REQUIRE(it != result.reviews.end());
  REQUIRE_FALSE(it->verdicts.empty());
  CHECK(it->verdicts.size() <= 3);
  CHECK(it->verdicts[0].decision == agents::Decision::kRevise);
  CHECK(it->verdicts[0].deficiencies.at(0).criterion == "sum_rate_bps_hz");
  CHECK(it->verdicts.back().decision == agents::Decision::kAccept);
  CHECK(it->proposals.at(0).tool_id == "mrt");
}

TEST_CASE("execute_dag matches the reference chain") {
  const auto cfg = phy::scenario_a();
  const auto reg = default_registry(cfg);
  const auto dag = orchestrate(kCaseStudyQuery, cfg, agents::default_roster(), reg, store()).dag;
  const auto params = phy::default_chain_params(cfg);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = phy::generate_scenario(cfg, drop_seed(3, seed));
    const auto exec = execute_dag(dag, ExecContext{cfg, r}, reg);
    const double expected = phy::run_drop(phy::Chain::kMultiAgent, r, cfg, params).sum_rate;
    CHECK(exec.rate().sum_rate > 0);
    CHECK(exec.rate().sum_rate == doctest::Approx(expected).epsilon(1e-12));

    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < exec.trace.size(); ++i) {
      pos[exec.trace[i].subtask_id] = i;
      CHECK(exec.trace[i].node == "edge-0");
      CHECK(exec.trace[i].within_budget);
      CHECK(exec.trace[i].wall_ms >= 0);
    }
    for (const auto& [a, b] : dag.edges()) CHECK(pos[a] < pos[b]);
  }
}

TEST_CASE("execute_dag error paths") {
  const auto cfg = phy::scenario_a();
  const auto reg = default_registry(cfg);
  const auto dag = orchestrate(kCaseStudyQuery, cfg, agents::default_roster(), reg, store()).dag;
  const auto r = phy::generate_scenario(cfg, 1);
  const ExecContext ctx{cfg, r};

  auto unknown = dag.subtask("precoding");
  unknown.tool_selection->tool_id = "quantum-precoder";
  CHECK(error_code([&] { execute_dag(dag.with_subtask(unknown), ctx, reg); }) == Errc::kUnknownTool);

  std::vector<SubtaskSpec> no_select;
  for (const auto& id : topological_order(dag))
    if (id != "ap-selection") no_select.push_back(dag.subtask(id));
  const auto cut = build_dag(no_select, {{"aoa-estimation", "channel-estimation"}, {"channel-estimation", "precoding"}});
  CHECK(error_code([&] { execute_dag(cut, ctx, reg); }) == Errc::kUpstreamMissingOutput);

  auto bare_spec = dag.subtask("precoding");
  bare_spec.tool_selection.reset();
  CHECK(error_code([&] { execute_dag(dag.with_subtask(bare_spec), ctx, reg); }) == Errc::kInvalidArgument);

  // An over-budget param is flagged in the trace.
  auto greedy = dag.subtask("aoa-estimation");
  greedy.tool_selection->params["grid_points"] = 4096;
  const auto exec = execute_dag(dag.with_subtask(greedy), ctx, reg);
  CHECK_FALSE(exec.trace.at(0).within_budget);
}

TEST_CASE("run_episode: no reflection at threshold 0, determinism") {
  const auto cfg = phy::scenario_a();
  const auto reg = default_registry(cfg);
  const auto roster = agents::default_roster();
  const auto a = run_episode(kCaseStudyQuery, cfg, roster, reg, store(), 5, 11);
  CHECK(a.reflection_events.empty());
  CHECK_FALSE(a.rolled_back);
  CHECK(a.per_drop_rates.size() == 5);
  for (double x : a.per_drop_rates) {
    CHECK(std::isfinite(x));
    CHECK(x >= 0);
  }
  CHECK(a.execution_order == topological_order(a.dag));
  CHECK(a.pre_reflection_mean == a.mean_rate());

  const auto b = run_episode(kCaseStudyQuery, cfg, roster, reg, store(), 5, 11);
  CHECK(a.episode_id != b.episode_id);
  CHECK(without_id(a) == without_id(b));
  CHECK(drops_csv(a) == drops_csv(b));
  CHECK(without_id(run_episode(kCaseStudyQuery, cfg, roster, reg, store(), 1, 4)) ==
        without_id(run_episode(kCaseStudyQuery, cfg, roster, reg, store(), 1, 4)));
  CHECK(error_code([&] { run_episode(kCaseStudyQuery, cfg, roster, reg, store(), 0, 1); }) == Errc::kInvalidArgument);
}

TEST_CASE("run_episode: validation-gated reflection") {
  for (const auto& base : {phy::scenario_a(), phy::scenario_b()}) {
    for (const auto precoder : {phy::PrecoderKind::kZf, phy::PrecoderKind::kMrt}) {
      auto cfg = base;
      cfg.precoder = precoder;
      OrchestratorOptions opts;
      opts.reflection_threshold = 1000;
      for (std::uint64_t seed : {0u, 1u, 2u}) {
        const auto rep = run_episode(kCaseStudyQuery, cfg, agents::default_roster(), default_registry(cfg), store(), 20,
                                     seed, opts);
        CHECK_FALSE(rep.reflection_events.empty());
        for (const auto& e : rep.reflection_events) {
          if (e.accepted) CHECK(e.validation_rate_after > e.validation_rate_before);
          else CHECK(e.validation_rate_after <= e.validation_rate_before);
        }
        CHECK(rep.reflection_exhausted);
        CHECK(rep.mean_rate() >= rep.pre_reflection_mean);

        // Recompute the pre-reflection mean from scratch on the same seeds.
        OrchestratorOptions plain = opts;
        plain.reflection_threshold = 0;
        const auto ref = run_episode(kCaseStudyQuery, cfg, agents::default_roster(), default_registry(cfg), store(), 20,
                                     seed, plain);
        CHECK(rep.pre_reflection_mean == ref.mean_rate());
        CHECK(rep.drop_seeds == ref.drop_seeds);
      }
    }
  }
}

TEST_CASE("synthesized feedback and outlier filtering") {
  std::vector<phy::RateResult> rates;
  for (int i = 0; i < 100; ++i) {
    phy::RateResult r;
    r.sum_rate = 10.0 + 0.01 * ((i * 37) % 100);
    r.sinr = Eigen::VectorXd::Constant(2, 10.0);
    rates.push_back(r);
  }
  const auto fb = synthesize_feedback(rates);
  REQUIRE(fb.size() == 100);
  CHECK(fb[49].quantitative.at("sum_rate_bps_hz") == doctest::Approx(rates[49].sum_rate * 10));
  CHECK(fb[99].quantitative.at("sum_rate_bps_hz") == doctest::Approx(rates[99].sum_rate * 10));
  CHECK(fb[0].quantitative.at("sum_rate_bps_hz") == rates[0].sum_rate);
  CHECK(fb[0].quantitative.at("sinr_db") == doctest::Approx(10.0));
  std::map<int, int> counts;
  for (const auto& r : fb) ++counts[r.text_rating];
  for (int q = 1; q <= 5; ++q) CHECK(counts[q] == 20);
  // The lowest rate rates 1, the highest 5.
  const auto lo = std::min_element(rates.begin(), rates.end(), [](auto& a, auto& b) { return a.sum_rate < b.sum_rate; }) - rates.begin();
  CHECK(fb[static_cast<std::size_t>(lo)].text_rating == 1);
  const auto agg = agents::aggregate_feedback(fb);
  CHECK(agg.metrics.at("sum_rate_bps_hz").discarded == 2);
}

TEST_CASE("run_scheme baselines") {
  const auto cfg = phy::scenario_a();
  const auto single = run_scheme(Scheme::kSingleAgent, cfg, 3, 0, store());
  CHECK(single.dag.subtasks().size() == 1);
  CHECK(single.dag.subtasks()[0].tool_selection->tool_id == "hybrid-e2e");
  const auto classical = run_scheme(Scheme::kClassical, cfg, 20, 0, store());
  CHECK(tool_ids(classical.dag) == std::set<std::string>{"ls-est", "top-l-select", "zf"});
  const auto perfect = run_scheme(Scheme::kPerfectCsi, cfg, 20, 0, store());
  CHECK(tool_ids(perfect.dag) == std::set<std::string>{"genie-est", "top-l-select", "zf"});
  CHECK(perfect.drop_seeds == classical.drop_seeds);
  int dominated = 0;
  for (std::size_t i = 0; i < 20; ++i) dominated += perfect.per_drop_rates[i] >= classical.per_drop_rates[i];
  CHECK(dominated >= 18);
  CHECK(perfect.mean_rate() > classical.mean_rate());
  CHECK(error_code([&] { baseline_dag(Scheme::kMultiAgent, {}, cfg); }) == Errc::kInvalidArgument);

  for (auto s : all_schemes()) CHECK(parse_scheme(scheme_name(s)) == s);
  CHECK_FALSE(parse_scheme("oracle").has_value());
  CHECK(all_schemes().size() == 4);
}

TEST_CASE("episode report serialization") {
  const auto rep = run_scheme(Scheme::kClassical, phy::scenario_a(), 3, 7, store());
  const auto csv = drops_csv(rep);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "drop_index,seed,scheme,sum_rate_bps_hz");
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(line.rfind(std::to_string(rows) + "," + std::to_string(drop_seed(7, static_cast<std::size_t>(rows))) + ",classical,", 0) == 0);
    ++rows;
  }
  CHECK(rows == 3);
  const auto j = to_json(rep);
  CHECK(j.at("scheme") == "classical");
  CHECK(j.at("per_drop_rates").size() == 3);
  CHECK(dag_from_json(j.at("dag")) == rep.dag);
  CHECK(j.dump().find("wall_ms") == std::string::npos);
}

TEST_CASE("remote backend: served replies and scripted fallback") {
  const auto cfg = phy::scenario_a();
  const auto reg = default_registry(cfg);
  const auto scripted = orchestrate(kCaseStudyQuery, cfg, agents::default_roster(), reg, store());

  httplib::Server server;
  std::vector<std::string> ops;
  server.Post("/v1/agent/act", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const auto op = body.at("operation").get<std::string>();
    ops.push_back(op);
    nlohmann::json reply;
    if (op == "expand_query") {
      reply["expansions"] = {"remote one", "remote two", "remote three"};
    } else if (op == "identify_intent") {
      reply["kind"] = intent_kind_name(IntentKind::kMaximizeSumRate);
    } else {
      const auto& tools = body.at("payload").at("tools");
      reply["tool_id"] = tools.at(0).at("tool_id");
      reply["params"] = tools.at(0).at("default_params");
    }
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  OrchestratorOptions opts;
  opts.backend_url = "http://127.0.0.1:" + std::to_string(port);
  const auto remote = orchestrate(kCaseStudyQuery, cfg, agents::default_roster(), reg, store(), opts);
  CHECK(remote.expansions == std::vector<std::string>{"remote one", "remote two", "remote three"});
  CHECK(remote.backend_fallbacks.empty());
  CHECK(tool_ids(remote.dag) == tool_ids(scripted.dag));
  CHECK(ops.size() == 2 + 4);
  server.stop();
  worker.join();

  // Server gone: every remote call falls back and the DAG matches the scripted one.
  const auto fallback = orchestrate(kCaseStudyQuery, cfg, agents::default_roster(), reg, store(), opts);
  CHECK_FALSE(fallback.backend_fallbacks.empty());
  CHECK(fallback.backend_fallbacks.size() == 6);
  CHECK(dag_to_string(fallback.dag) == dag_to_string(scripted.dag));
}
