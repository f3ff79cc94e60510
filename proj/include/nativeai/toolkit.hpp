#pragma once

// Closed registry of edge tools. Each tool wraps phy-sim operations behind
// declared input/output keys so the executor can wire a DAG without knowing
// the tool internals.

#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "nativeai/phy_sim.hpp"
#include "nativeai/task_model.hpp"

namespace nativeai {

// Output keys exchanged between tools.
namespace keys {
inline constexpr const char* kAoaEstimates = "aoa_estimates";          // K x U radians
inline constexpr const char* kChannelEstimates = "channel_estimates";  // ChannelSet
inline constexpr const char* kApAssignment = "ap_assignment";
inline constexpr const char* kPrecode = "precode";
inline constexpr const char* kSumRate = "sum_rate_bps_hz";  // RateResult
}  // namespace keys

using ToolValue = std::variant<Eigen::MatrixXd, phy::ChannelSet, phy::ApAssignment, phy::PrecodeResult, phy::RateResult>;
using ToolOutputs = std::map<std::string, ToolValue>;

struct ExecContext {
  const phy::ScenarioConfig& config;
  const phy::ChannelRealization& realization;
};

// What a predictor may know before anything runs.
struct ScenarioSummary {
  int num_aps = 0;
  int num_users = 0;
  int num_antennas = 0;
  int aps_per_user = 1;
  double tx_power_per_ap_w = 0.0;
  double noise_power_w = 1.0;
  double median_beta = 0.0;  // over a fixed reference drop
  double pilot_snr_db = 0.0;
};

ScenarioSummary summarize(const phy::ScenarioConfig& config);

using Predictor = std::function<ParamMap(const ParamMap& params, const ScenarioSummary& summary)>;
using Executor = std::function<ToolOutputs(const ExecContext& ctx, const ParamMap& params, const ToolOutputs& inputs)>;

struct ToolDescriptor {
  std::string tool_id;
  std::string capability;
  int quality_rank = 0;
  ParamMap default_params;
  ParamMap min_params;                                  // smallest usable value per param
  std::map<std::string, std::string> param_budget_keys;  // param -> resource_constraints key
  std::vector<std::string> input_keys;
  std::vector<std::string> output_keys;
  Predictor predictor;
  Executor executor;
  bool planner_visible = true;  // baseline-only tools are hidden from specialists
};

class ToolRegistry {
 public:
  // Throws Error(kDuplicateTool).
  ToolRegistry& register_tool(ToolDescriptor descriptor);

  const ToolDescriptor* find(const std::string& tool_id) const;
  // Highest quality_rank first, then tool_id.
  std::vector<const ToolDescriptor*> by_capability(const std::string& capability, bool planner_only = false) const;
  const std::vector<ToolDescriptor>& tools() const { return tools_; }
  std::size_t size() const { return tools_.size(); }

 private:
  std::vector<ToolDescriptor> tools_;
};

// aoa-grid, ls-est, aoa-assisted-est, genie-est, top-l-select, mrt, zf, hybrid-e2e.
// Defaults come from the config; the configured precoder gets the higher rank.
ToolRegistry default_registry(const phy::ScenarioConfig& config);

// Throws Error(kUpstreamMissingOutput) naming the key and tool.
template <class T>
const T& tool_input(const ToolOutputs& inputs, const std::string& key, const std::string& tool_id);

double param_or(const ParamMap& params, const std::string& key, double fallback);

}  // namespace nativeai
