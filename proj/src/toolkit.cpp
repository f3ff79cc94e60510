#include "nativeai/toolkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nativeai/error.hpp"

namespace nativeai {

using namespace phy;

namespace {

constexpr std::uint64_t kSummarySeed = 0;

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

int int_param(const ParamMap& params, const std::string& key, double fallback) {
  return static_cast<int>(std::lround(param_or(params, key, fallback)));
}

ScenarioConfig with_power(const ScenarioConfig& config, const ParamMap& params) {
  ScenarioConfig c = config;
  c.tx_power_per_ap_w = param_or(params, "power_w", config.tx_power_per_ap_w);
  return c;
}

// Crude link-budget guess: equal power over the served stack, array gain L*Nt at the median
// pathloss, and a ZF dimension penalty or an MRT interference floor.
double predicted_sum_rate(const ScenarioSummary& s, double power_w, bool zero_forcing) {
  const int stacked_aps = std::min(s.num_aps, s.aps_per_user * s.num_users);
  const double dims = static_cast<double>(stacked_aps) * s.num_antennas;
  const double p = power_w * stacked_aps / s.num_users;
  const double signal = p * s.aps_per_user * s.num_antennas * s.median_beta;
  double sinr = 0.0;
  if (zero_forcing) {
    sinr = signal * std::max(0.0, 1.0 - (s.num_users - 1) / dims) / s.noise_power_w;
  } else {
    sinr = signal / (signal * (s.num_users - 1) / dims + s.noise_power_w);
  }
  return s.num_users * std::log2(1.0 + sinr);
}

double ls_nmse_db(const ScenarioSummary& s, int pilot_length) {
  return -10.0 * std::log10(pilot_length * db_to_linear(s.pilot_snr_db));
}

ToolDescriptor aoa_grid_tool(const ScenarioConfig& c) {
  ToolDescriptor t;
  t.tool_id = "aoa-grid";
  t.capability = "aoa-estimation";
  t.quality_rank = 1;
  t.default_params = {{"grid_points", c.aoa_grid_points}, {"pilot_length", c.pilot_length_symbols}};
  t.min_params = {{"grid_points", 2}, {"pilot_length", c.num_users}};
  t.param_budget_keys = {{"grid_points", "max_grid_points"}, {"pilot_length", "max_pilot_symbols"}};
  t.output_keys = {keys::kAoaEstimates};
  t.predictor = [](const ParamMap& p, const ScenarioSummary&) {
    const double grid = param_or(p, "grid_points", 2);
    return ParamMap{{"angle_resolution_rad", std::numbers::pi / (grid - 1.0)}};
  };
  t.executor = [](const ExecContext& ctx, const ParamMap& p, const ToolOutputs&) {
    const auto ls = ls_estimates(ctx.config, ctx.realization, int_param(p, "pilot_length", ctx.config.pilot_length_symbols));
    return ToolOutputs{
        {keys::kAoaEstimates, estimate_aoa_per_ap(ls, int_param(p, "grid_points", ctx.config.aoa_grid_points))}};
  };
  return t;
}

ToolDescriptor ls_tool(const ScenarioConfig& c) {
  ToolDescriptor t;
  t.tool_id = "ls-est";
  t.capability = "channel-estimation";
  t.quality_rank = 1;
  t.default_params = {{"pilot_length", c.pilot_length_symbols}};
  t.min_params = {{"pilot_length", c.num_users}};
  t.param_budget_keys = {{"pilot_length", "max_pilot_symbols"}};
  t.output_keys = {keys::kChannelEstimates};
  t.predictor = [](const ParamMap& p, const ScenarioSummary& s) {
    return ParamMap{{"nmse_db", ls_nmse_db(s, int_param(p, "pilot_length", s.num_users))},
                    {"output_dim", static_cast<double>(s.num_aps) * s.num_antennas}};
  };
  t.executor = [](const ExecContext& ctx, const ParamMap& p, const ToolOutputs&) {
    return ToolOutputs{{keys::kChannelEstimates,
                        ls_estimates(ctx.config, ctx.realization, int_param(p, "pilot_length", ctx.config.pilot_length_symbols))}};
  };
  return t;
}

ToolDescriptor aoa_assisted_tool(const ScenarioConfig& c) {
  ToolDescriptor t = ls_tool(c);
  t.tool_id = "aoa-assisted-est";
  t.quality_rank = 2;
  t.input_keys = {keys::kAoaEstimates};
  t.predictor = [](const ParamMap& p, const ScenarioSummary& s) {
    return ParamMap{
        {"nmse_db", ls_nmse_db(s, int_param(p, "pilot_length", s.num_users)) - 10.0 * std::log10(s.num_antennas)},
        {"output_dim", static_cast<double>(s.num_aps) * s.num_antennas}};
  };
  t.executor = [id = t.tool_id](const ExecContext& ctx, const ParamMap& p, const ToolOutputs& in) {
    const auto& thetas = tool_input<Eigen::MatrixXd>(in, keys::kAoaEstimates, id);
    const auto ls = ls_estimates(ctx.config, ctx.realization, int_param(p, "pilot_length", ctx.config.pilot_length_symbols));
    return ToolOutputs{{keys::kChannelEstimates, aoa_refined(ls, thetas)}};
  };
  return t;
}

ToolDescriptor genie_tool() {
  ToolDescriptor t;
  t.tool_id = "genie-est";
  t.capability = "channel-estimation";
  t.quality_rank = 0;
  t.output_keys = {keys::kChannelEstimates};
  t.planner_visible = false;
  t.predictor = [](const ParamMap&, const ScenarioSummary& s) {
    return ParamMap{{"nmse_db", -300.0}, {"output_dim", static_cast<double>(s.num_aps) * s.num_antennas}};
  };
  t.executor = [](const ExecContext& ctx, const ParamMap&, const ToolOutputs&) {
    return ToolOutputs{{keys::kChannelEstimates, ctx.realization.channels}};
  };
  return t;
}

ToolDescriptor top_l_tool(const ScenarioConfig& c) {
  ToolDescriptor t;
  t.tool_id = "top-l-select";
  t.capability = "ap-selection";
  t.quality_rank = 1;
  t.default_params = {{"aps_per_user", c.ap_select_l}};
  t.min_params = {{"aps_per_user", 1}};
  t.param_budget_keys = {{"aps_per_user", "max_aps_per_user"}};
  t.input_keys = {keys::kChannelEstimates};
  t.output_keys = {keys::kApAssignment};
  t.predictor = [](const ParamMap& p, const ScenarioSummary&) {
    return ParamMap{{"aps_per_user", param_or(p, "aps_per_user", 0)}};
  };
  t.executor = [id = t.tool_id](const ExecContext& ctx, const ParamMap& p, const ToolOutputs& in) {
    const auto& est = tool_input<ChannelSet>(in, keys::kChannelEstimates, id);
    return ToolOutputs{{keys::kApAssignment, select_aps(est.gains(), int_param(p, "aps_per_user", ctx.config.ap_select_l))}};
  };
  return t;
}

ToolDescriptor precoder_tool(const ScenarioConfig& c, PrecoderKind kind) {
  ToolDescriptor t;
  t.tool_id = precoder_name(kind);
  t.capability = "precoding";
  t.quality_rank = kind == c.precoder ? 2 : 1;
  t.default_params = {{"power_w", c.tx_power_per_ap_w}};
  t.param_budget_keys = {{"power_w", "power_budget"}};
  t.input_keys = {keys::kChannelEstimates, keys::kApAssignment};
  t.output_keys = {keys::kPrecode, keys::kSumRate};
  t.predictor = [kind](const ParamMap& p, const ScenarioSummary& s) {
    return ParamMap{{"sum_rate_bps_hz", predicted_sum_rate(s, param_or(p, "power_w", s.tx_power_per_ap_w),
                                                           kind == PrecoderKind::kZf)},
                    {"input_dim", static_cast<double>(s.num_aps) * s.num_antennas}};
  };
  t.executor = [id = t.tool_id, kind](const ExecContext& ctx, const ParamMap& p, const ToolOutputs& in) {
    const auto& est = tool_input<ChannelSet>(in, keys::kChannelEstimates, id);
    const auto& assignment = tool_input<ApAssignment>(in, keys::kApAssignment, id);
    const auto cfg = with_power(ctx.config, p);
    const auto aps = serving_union(assignment);
    auto result = precode(est.stacked(aps), assignment, aps, cfg, kind);
    auto rate = sum_rate(ctx.realization.channels, result, cfg.noise_power_w);
    return ToolOutputs{{keys::kPrecode, std::move(result)}, {keys::kSumRate, std::move(rate)}};
  };
  return t;
}

ToolDescriptor hybrid_tool(const ScenarioConfig& c) {
  ToolDescriptor t;
  t.tool_id = "hybrid-e2e";
  t.capability = "hybrid-beamforming";
  t.quality_rank = 1;
  t.default_params = {{"pilot_length", c.pilot_length_symbols}, {"aps_per_user", c.ap_select_l}, {"power_w", c.tx_power_per_ap_w}};
  t.min_params = {{"pilot_length", c.num_users}, {"aps_per_user", 1}};
  t.param_budget_keys = {{"pilot_length", "max_pilot_symbols"}, {"aps_per_user", "max_aps_per_user"}, {"power_w", "power_budget"}};
  t.output_keys = {keys::kPrecode, keys::kSumRate};
  t.planner_visible = false;
  t.predictor = [](const ParamMap& p, const ScenarioSummary& s) {
    return ParamMap{{"sum_rate_bps_hz", predicted_sum_rate(s, param_or(p, "power_w", s.tx_power_per_ap_w), true)}};
  };
  t.executor = [](const ExecContext& ctx, const ParamMap& p, const ToolOutputs&) {
    const auto cfg = with_power(ctx.config, p);
    const auto ls = ls_estimates(cfg, ctx.realization, int_param(p, "pilot_length", cfg.pilot_length_symbols));
    const auto assignment = select_aps(ls.gains(), int_param(p, "aps_per_user", cfg.ap_select_l));
    auto result = hybrid_precoder(ls, assignment, cfg);
    auto rate = sum_rate(ctx.realization.channels, result, cfg.noise_power_w);
    return ToolOutputs{{keys::kPrecode, std::move(result)}, {keys::kSumRate, std::move(rate)}};
  };
  return t;
}

}  // namespace

double param_or(const ParamMap& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

template <class T>
const T& tool_input(const ToolOutputs& inputs, const std::string& key, const std::string& tool_id) {
  const auto it = inputs.find(key);
  if (it == inputs.end() || !std::holds_alternative<T>(it->second)) {
    throw Error(Errc::kUpstreamMissingOutput, tool_id + " needs " + key);
  }
  return std::get<T>(it->second);
}

template const Eigen::MatrixXd& tool_input<Eigen::MatrixXd>(const ToolOutputs&, const std::string&, const std::string&);
template const ChannelSet& tool_input<ChannelSet>(const ToolOutputs&, const std::string&, const std::string&);
template const ApAssignment& tool_input<ApAssignment>(const ToolOutputs&, const std::string&, const std::string&);
template const PrecodeResult& tool_input<PrecodeResult>(const ToolOutputs&, const std::string&, const std::string&);
template const RateResult& tool_input<RateResult>(const ToolOutputs&, const std::string&, const std::string&);

ScenarioSummary summarize(const ScenarioConfig& config) {
  const auto r = generate_scenario(config, kSummarySeed);
  std::vector<double> b(r.betas.data(), r.betas.data() + r.betas.size());
  std::sort(b.begin(), b.end());
  const std::size_t n = b.size();
  ScenarioSummary s;
  s.num_aps = config.num_aps;
  s.num_users = config.num_users;
  s.num_antennas = config.num_antennas;
  s.aps_per_user = config.ap_select_l;
  s.tx_power_per_ap_w = config.tx_power_per_ap_w;
  s.noise_power_w = config.noise_power_w;
  s.median_beta = n % 2 == 1 ? b[n / 2] : 0.5 * (b[n / 2 - 1] + b[n / 2]);
  s.pilot_snr_db = config.pilot_snr_db;
  return s;
}

ToolRegistry& ToolRegistry::register_tool(ToolDescriptor descriptor) {
  if (find(descriptor.tool_id) != nullptr) throw Error(Errc::kDuplicateTool, descriptor.tool_id);
  if (descriptor.quality_rank < 0) throw Error(Errc::kInvalidArgument, descriptor.tool_id + ": negative quality_rank");
  tools_.push_back(std::move(descriptor));
  return *this;
}

const ToolDescriptor* ToolRegistry::find(const std::string& tool_id) const {
  const auto it = std::find_if(tools_.begin(), tools_.end(), [&](const auto& t) { return t.tool_id == tool_id; });
  return it == tools_.end() ? nullptr : &*it;
}

std::vector<const ToolDescriptor*> ToolRegistry::by_capability(const std::string& capability, bool planner_only) const {
  std::vector<const ToolDescriptor*> out;
  for (const auto& t : tools_) {
    if (t.capability == capability && (!planner_only || t.planner_visible)) out.push_back(&t);
  }
  std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
    if (a->quality_rank != b->quality_rank) return a->quality_rank > b->quality_rank;
    return a->tool_id < b->tool_id;
  });
  return out;
}

ToolRegistry default_registry(const ScenarioConfig& config) {
  ToolRegistry r;
  r.register_tool(aoa_grid_tool(config))
      .register_tool(ls_tool(config))
      .register_tool(aoa_assisted_tool(config))
      .register_tool(genie_tool())
      .register_tool(top_l_tool(config))
      .register_tool(precoder_tool(config, PrecoderKind::kMrt))
      .register_tool(precoder_tool(config, PrecoderKind::kZf))
      .register_tool(hybrid_tool(config));
  return r;
}

}  // namespace nativeai
