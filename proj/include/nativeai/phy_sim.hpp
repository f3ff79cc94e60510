#pragma once

// Cell-free massive MIMO downlink with line-of-sight block fading: geometry,
// uplink pilots, AoA and channel estimation, AP selection, precoding, and
// sum-rate evaluation. Every function is pure; randomness enters only through
// explicit seeds.

#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace nativeai::phy {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

enum class PrecoderKind { kMrt, kZf };

std::string precoder_name(PrecoderKind kind);
PrecoderKind parse_precoder(std::string_view name);

struct ScenarioConfig {
  int num_aps = 5;        // K
  int num_users = 3;      // U
  int num_antennas = 64;  // Nt
  double area_side_m = 100.0;
  double tx_power_per_ap_w = 1.0e4;
  double noise_power_w = 1.0;
  double pathloss_exponent = 2.8;
  double reference_distance_m = 1.0;
  int pilot_length_symbols = 8;
  double pilot_snr_db = -5.0;
  int aoa_grid_points = 256;
  PrecoderKind precoder = PrecoderKind::kZf;
  int ap_select_l = 2;

  bool operator==(const ScenarioConfig&) const = default;
};

// Throws Error(kInvalidConfig) whose detail starts with the offending key name.
void validate(const ScenarioConfig& config);

// Flat `key = value` text (TOML subset). Keys are the external field names:
// K, U, Nt, area_side_m, tx_power_per_ap_w, noise_power_w, pathloss_exponent,
// reference_distance_m, pilot_length_symbols, pilot_snr_db, aoa_grid_points,
// precoder, ap_select_l. Missing keys keep their defaults.
ScenarioConfig parse_scenario_config(std::string_view text);
std::string to_config_text(const ScenarioConfig& config);
nlohmann::json to_json(const ScenarioConfig& config);

ScenarioConfig scenario_a();  // K=5, U=3, Nt=64
ScenarioConfig scenario_b();  // K=1, U=5, Nt=64

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Per-(AP, user) complex vectors of length Nt, stored AP-major.
class ChannelSet {
 public:
  ChannelSet() = default;
  ChannelSet(int num_aps, int num_users, int num_antennas);

  int num_aps() const { return num_aps_; }
  int num_users() const { return num_users_; }
  int num_antennas() const { return num_antennas_; }

  CVec& at(int ap, int user) { return links_[static_cast<std::size_t>(ap * num_users_ + user)]; }
  const CVec& at(int ap, int user) const { return links_[static_cast<std::size_t>(ap * num_users_ + user)]; }

  // K x U matrix of squared norms.
  Eigen::MatrixXd gains() const;

  // U x (|aps| * Nt) matrix whose row u is [h_{aps[0],u}^H, h_{aps[1],u}^H, ...].
  CMat stacked(const std::vector<int>& aps) const;

 private:
  int num_aps_ = 0;
  int num_users_ = 0;
  int num_antennas_ = 0;
  std::vector<CVec> links_;
};

struct ChannelRealization {
  std::vector<Point> ap_positions;
  std::vector<Point> user_positions;
  Eigen::MatrixXd thetas;  // K x U, radians in [-pi/2, pi/2]
  Eigen::MatrixXd betas;   // K x U, linear large-scale gain
  ChannelSet channels;
  std::uint64_t drop_seed = 0;
};

// Independent sub-streams of one drop seed.
enum class Stream : std::uint64_t { kGeometry = 1, kPilotNoise = 2 };
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

// Half-wavelength ULA response, a_n = exp(i*pi*n*sin(theta)).
CVec steering_vector(double theta, int num_antennas);

// ULA axis along x; broadside is +y. Back-lobe bearings are mirrored into [-pi/2, pi/2].
double bearing(const Point& ap, const Point& user);

double pathloss_gain(double distance_m, const ScenarioConfig& config);

ChannelRealization generate_scenario(const ScenarioConfig& config, std::uint64_t seed);

// Uplink pilot phase: U orthogonal unit-modulus sequences of length tau.
CMat orthogonal_pilots(int num_users, int pilot_length);

// Pilot transmit power that puts the median link of this drop at pilot_snr_db (per antenna, per symbol).
double pilot_power(const ScenarioConfig& config, const ChannelRealization& realization);

struct PilotObservation {
  std::vector<CMat> rx;  // per AP, Nt x tau
  double pilot_power = 0.0;
  double noise_power = 0.0;
  int pilot_length = 0;
};

PilotObservation transmit_pilots(const ScenarioConfig& config, const ChannelRealization& realization,
                                 int pilot_length);

// Y * conj(x_u) / (tau * sqrt(p)) per user. Returns Nt x U.
CMat ls_channel_estimate(const CMat& pilot_rx, int num_users, double pilot_power);

// Matched-filter spectrum |a(theta)^H r|^2 on a uniform grid over [-pi/2, pi/2];
// one snapshot per column. Ties go to the smaller angle.
std::vector<double> estimate_aoa(const CMat& snapshots, int grid_points);

std::vector<double> aoa_grid(int grid_points);

// Rank-one projection of each LS column onto a(theta_hat).
CMat aoa_assisted_estimate(const CMat& ls_estimates, const std::vector<double>& theta_hat);

using ApAssignment = std::vector<std::vector<int>>;  // per user, ascending AP indices

ApAssignment select_aps(const Eigen::MatrixXd& est_gains, int aps_per_user);

// Sorted union of all serving APs.
std::vector<int> serving_union(const ApAssignment& assignment);

struct PrecodeResult {
  CMat directions;                // M x U, unit-norm columns
  Eigen::VectorXd power;          // per-user transmit power (W)
  ApAssignment assignment;
  std::vector<int> stacked_aps;   // AP order of the M rows, Nt rows each
  int num_antennas = 0;
  bool regularized = false;       // a regularized inverse replaced plain ZF

  Eigen::VectorXd per_ap_power() const;
};

PrecodeResult zf_precoder(const CMat& stacked_estimate, const ApAssignment& assignment,
                          const std::vector<int>& stacked_aps, const ScenarioConfig& config);
// W = H^H (H H^H + (noise * U / P_total) I)^-1, columns normalized; `regularized` is set.
PrecodeResult regularized_zf_precoder(const CMat& stacked_estimate, const ApAssignment& assignment,
                                      const std::vector<int>& stacked_aps, const ScenarioConfig& config);
PrecodeResult mrt_precoder(const CMat& stacked_estimate, const ApAssignment& assignment,
                           const std::vector<int>& stacked_aps, const ScenarioConfig& config);

// Dispatch on kind. ZF switches to the regularized inverse when the estimate is
// rank deficient or badly conditioned (sigma_min / sigma_max < 0.03), e.g. two
// users quantized onto the same AoA grid point.
PrecodeResult precode(const CMat& stacked_estimate, const ApAssignment& assignment,
                      const std::vector<int>& stacked_aps, const ScenarioConfig& config, PrecoderKind kind);

// Unit-norm DFT beam m of an Nt-element ULA, pointing at sin(theta) = 2m/Nt - 1.
CVec dft_beam(int m, int num_antennas);

PrecodeResult hybrid_precoder(const ChannelSet& estimates, const ApAssignment& assignment,
                              const ScenarioConfig& config);

struct RateResult {
  double sum_rate = 0.0;  // bits/s/Hz
  Eigen::VectorXd sinr;
};

// Always evaluate against the true channels.
RateResult sum_rate(const ChannelSet& true_channels, const PrecodeResult& precode, double noise_power);

enum class Chain { kPerfectCsi, kMultiAgent, kClassical, kSingleAgent };

struct ChainParams {
  int grid_points = 256;
  int pilot_length = 8;
  int aps_per_user = 2;
  PrecoderKind precoder = PrecoderKind::kZf;
};

ChainParams default_chain_params(const ScenarioConfig& config);

// LS estimates for every (AP, user) from one pilot phase of the given length.
ChannelSet ls_estimates(const ScenarioConfig& config, const ChannelRealization& realization, int pilot_length);

// K x U matrix of matched-filter AoA estimates, one spectrum per LS column.
Eigen::MatrixXd estimate_aoa_per_ap(const ChannelSet& ls, int grid_points);

// Rank-one projection of every LS vector onto a(theta_hat(k, u)).
ChannelSet aoa_refined(const ChannelSet& ls, const Eigen::MatrixXd& theta_hat);

// Top-L selection, serving-AP union, then precode() on the stacked estimate.
PrecodeResult digital_precode(const ChannelSet& estimates, const ScenarioConfig& config, const ChainParams& params);

// Reference wiring of the four processing chains on one drop.
RateResult run_drop(Chain chain, const ChannelRealization& realization, const ScenarioConfig& config,
                    const ChainParams& params);

// CSV rows: k,u,theta_rad,beta,re0,im0,...
std::string channels_to_csv(const ChannelRealization& realization);

}  // namespace nativeai::phy
