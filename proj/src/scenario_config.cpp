#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "nativeai/error.hpp"
#include "nativeai/phy_sim.hpp"

namespace nativeai::phy {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(Errc::kInvalidConfig, key + ": " + why);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_number(const std::string& key, const std::string& raw) {
  double value = 0.0;
  const auto* end = raw.data() + raw.size();
  auto [ptr, ec] = std::from_chars(raw.data(), end, value);
  if (ec != std::errc{} || ptr != end) bad(key, "expected a number, got '" + raw + "'");
  return value;
}

int parse_int(const std::string& key, const std::string& raw) {
  const double v = parse_number(key, raw);
  if (v != std::floor(v) || std::abs(v) > 1e9) bad(key, "expected an integer, got '" + raw + "'");
  return static_cast<int>(v);
}

std::string unquote(const std::string& key, const std::string& raw) {
  if (raw.size() >= 2 && (raw.front() == '"' || raw.front() == '\'') && raw.back() == raw.front()) {
    return raw.substr(1, raw.size() - 2);
  }
  bad(key, "expected a quoted string");
}

using Setter = std::function<void(ScenarioConfig&, const std::string& key, const std::string& raw)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"K", [](auto& c, auto& k, auto& v) { c.num_aps = parse_int(k, v); }},
      {"U", [](auto& c, auto& k, auto& v) { c.num_users = parse_int(k, v); }},
      {"Nt", [](auto& c, auto& k, auto& v) { c.num_antennas = parse_int(k, v); }},
      {"area_side_m", [](auto& c, auto& k, auto& v) { c.area_side_m = parse_number(k, v); }},
      {"tx_power_per_ap_w", [](auto& c, auto& k, auto& v) { c.tx_power_per_ap_w = parse_number(k, v); }},
      {"noise_power_w", [](auto& c, auto& k, auto& v) { c.noise_power_w = parse_number(k, v); }},
      {"pathloss_exponent", [](auto& c, auto& k, auto& v) { c.pathloss_exponent = parse_number(k, v); }},
      {"reference_distance_m", [](auto& c, auto& k, auto& v) { c.reference_distance_m = parse_number(k, v); }},
      {"pilot_length_symbols", [](auto& c, auto& k, auto& v) { c.pilot_length_symbols = parse_int(k, v); }},
      {"pilot_snr_db", [](auto& c, auto& k, auto& v) { c.pilot_snr_db = parse_number(k, v); }},
      {"aoa_grid_points", [](auto& c, auto& k, auto& v) { c.aoa_grid_points = parse_int(k, v); }},
      {"precoder", [](auto& c, auto& k, auto& v) { c.precoder = parse_precoder(unquote(k, v)); }},
      {"ap_select_l", [](auto& c, auto& k, auto& v) { c.ap_select_l = parse_int(k, v); }},
  };
  return table;
}

}  // namespace

void validate(const ScenarioConfig& c) {
  if (c.num_aps < 1) bad("K", "must be at least 1");
  if (c.num_users < 1) bad("U", "must be at least 1");
  if (c.num_antennas < 1) bad("Nt", "must be at least 1");
  if (!(c.area_side_m > 0.0) || !std::isfinite(c.area_side_m)) bad("area_side_m", "must be positive");
  if (!(c.tx_power_per_ap_w > 0.0) || !std::isfinite(c.tx_power_per_ap_w)) bad("tx_power_per_ap_w", "must be positive");
  if (!(c.noise_power_w > 0.0) || !std::isfinite(c.noise_power_w)) bad("noise_power_w", "must be positive");
  if (!(c.pathloss_exponent >= 0.0) || !std::isfinite(c.pathloss_exponent)) {
    bad("pathloss_exponent", "must be non-negative");
  }
  if (!(c.reference_distance_m > 0.0) || !std::isfinite(c.reference_distance_m)) {
    bad("reference_distance_m", "must be positive");
  }
  if (c.pilot_length_symbols < c.num_users) bad("pilot_length_symbols", "must be at least U");
  if (!std::isfinite(c.pilot_snr_db)) bad("pilot_snr_db", "must be finite");
  if (c.aoa_grid_points < 2) bad("aoa_grid_points", "must be at least 2");
  if (c.ap_select_l < 1 || c.ap_select_l > c.num_aps) bad("ap_select_l", "must lie in [1, K]");
  if (c.precoder == PrecoderKind::kZf && c.num_users > c.ap_select_l * c.num_antennas) {
    bad("U", "exceeds the antenna dimension available to zero forcing");
  }
}

ScenarioConfig parse_scenario_config(std::string_view text) {
  ScenarioConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) bad(body, "expected 'key = value'");
    const auto key = trim(std::string_view(body).substr(0, eq));
    const auto value = trim(std::string_view(body).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) bad(key, "unknown key");
    it->second(config, key, value);
  }
  validate(config);
  return config;
}

std::string to_config_text(const ScenarioConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "K = " << c.num_aps << "\n"
      << "U = " << c.num_users << "\n"
      << "Nt = " << c.num_antennas << "\n"
      << "area_side_m = " << c.area_side_m << "\n"
      << "tx_power_per_ap_w = " << c.tx_power_per_ap_w << "\n"
      << "noise_power_w = " << c.noise_power_w << "\n"
      << "pathloss_exponent = " << c.pathloss_exponent << "\n"
      << "reference_distance_m = " << c.reference_distance_m << "\n"
      << "pilot_length_symbols = " << c.pilot_length_symbols << "\n"
      << "pilot_snr_db = " << c.pilot_snr_db << "\n"
      << "aoa_grid_points = " << c.aoa_grid_points << "\n"
      << "precoder = \"" << precoder_name(c.precoder) << "\"\n"
      << "ap_select_l = " << c.ap_select_l << "\n";
  return out.str();
}

nlohmann::json to_json(const ScenarioConfig& c) {
  return {{"K", c.num_aps},
          {"U", c.num_users},
          {"Nt", c.num_antennas},
          {"area_side_m", c.area_side_m},
          {"tx_power_per_ap_w", c.tx_power_per_ap_w},
          {"noise_power_w", c.noise_power_w},
          {"pathloss_exponent", c.pathloss_exponent},
          {"reference_distance_m", c.reference_distance_m},
          {"pilot_length_symbols", c.pilot_length_symbols},
          {"pilot_snr_db", c.pilot_snr_db},
          {"aoa_grid_points", c.aoa_grid_points},
          {"precoder", precoder_name(c.precoder)},
          {"ap_select_l", c.ap_select_l}};
}

ScenarioConfig scenario_a() { return ScenarioConfig{}; }

ScenarioConfig scenario_b() {
  ScenarioConfig c;
  c.num_aps = 1;
  c.num_users = 5;
  c.ap_select_l = 1;
  return c;
}

}  // namespace nativeai::phy
