#include "nativeai/phy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "nativeai/error.hpp"

namespace nativeai::phy {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinApUserDistanceM = 5.0;
constexpr double kRankTolerance = 1e-12;
// Below this sigma_min / sigma_max ratio ZF noise enhancement dominates and the
// dispatcher switches to the regularized inverse.
constexpr double kZfConditionFloor = 3e-2;

}  // namespace

std::string precoder_name(PrecoderKind kind) { return kind == PrecoderKind::kMrt ? "mrt" : "zf"; }

PrecoderKind parse_precoder(std::string_view name) {
  if (name == "mrt") return PrecoderKind::kMrt;
  if (name == "zf") return PrecoderKind::kZf;
  throw Error(Errc::kInvalidConfig, "precoder: expected \"mrt\" or \"zf\", got \"" + std::string(name) + "\"");
}

ChannelSet::ChannelSet(int num_aps, int num_users, int num_antennas)
    : num_aps_(num_aps),
      num_users_(num_users),
      num_antennas_(num_antennas),
      links_(static_cast<std::size_t>(num_aps * num_users), CVec::Zero(num_antennas)) {}

Eigen::MatrixXd ChannelSet::gains() const {
  Eigen::MatrixXd g(num_aps_, num_users_);
  for (int k = 0; k < num_aps_; ++k) {
    for (int u = 0; u < num_users_; ++u) g(k, u) = at(k, u).squaredNorm();
  }
  return g;
}

CMat ChannelSet::stacked(const std::vector<int>& aps) const {
  CMat h(num_users_, static_cast<Eigen::Index>(aps.size()) * num_antennas_);
  for (int u = 0; u < num_users_; ++u) {
    for (std::size_t i = 0; i < aps.size(); ++i) {
      h.block(u, static_cast<Eigen::Index>(i) * num_antennas_, 1, num_antennas_) = at(aps[i], u).adjoint();
    }
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CVec steering_vector(double theta, int num_antennas) {
  CVec a(num_antennas);
  const double phase = kPi * std::sin(theta);
  for (int n = 0; n < num_antennas; ++n) a(n) = std::polar(1.0, phase * n);
  return a;
}

double bearing(const Point& ap, const Point& user) {
  const double dx = user.x - ap.x;
  const double dy = std::abs(user.y - ap.y);
  return std::atan2(dx, dy);
}

double pathloss_gain(double distance_m, const ScenarioConfig& config) {
  return std::pow(distance_m / config.reference_distance_m, -config.pathloss_exponent);
}

ChannelRealization generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  validate(config);
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(Stream::kGeometry)));
  std::uniform_real_distribution<double> coord(0.0, config.area_side_m);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);

  const int K = config.num_aps;
  const int U = config.num_users;
  ChannelRealization r;
  r.drop_seed = seed;
  for (int k = 0; k < K; ++k) r.ap_positions.push_back({coord(rng), coord(rng)});

  auto too_close = [&](const Point& p) {
    return std::any_of(r.ap_positions.begin(), r.ap_positions.end(),
                       [&](const Point& ap) { return std::hypot(p.x - ap.x, p.y - ap.y) < kMinApUserDistanceM; });
  };
  for (int u = 0; u < U; ++u) {
    Point p{coord(rng), coord(rng)};
    for (int attempt = 0; too_close(p); ++attempt) {
      if (attempt > 100000) throw Error(Errc::kInvalidConfig, "area_side_m: too small to keep users 5 m from APs");
      p = {coord(rng), coord(rng)};
    }
    r.user_positions.push_back(p);
  }

  r.thetas.resize(K, U);
  r.betas.resize(K, U);
  r.channels = ChannelSet(K, U, config.num_antennas);
  for (int k = 0; k < K; ++k) {
    for (int u = 0; u < U; ++u) {
      const auto& ap = r.ap_positions[static_cast<std::size_t>(k)];
      const auto& ue = r.user_positions[static_cast<std::size_t>(u)];
      const double d = std::hypot(ue.x - ap.x, ue.y - ap.y);
      const double theta = bearing(ap, ue);
      const double beta = pathloss_gain(d, config);
      r.thetas(k, u) = theta;
      r.betas(k, u) = beta;
      r.channels.at(k, u) = std::sqrt(beta) * std::polar(1.0, phase(rng)) * steering_vector(theta, config.num_antennas);
    }
  }
  return r;
}

CMat orthogonal_pilots(int num_users, int pilot_length) {
  if (pilot_length < num_users) {
    throw Error(Errc::kInvalidArgument, "pilot_length_symbols must be at least U for orthogonal pilots");
  }
  CMat x(num_users, pilot_length);
  for (int u = 0; u < num_users; ++u) {
    for (int t = 0; t < pilot_length; ++t) {
      x(u, t) = std::polar(1.0, -2.0 * kPi * u * t / pilot_length);
    }
  }
  return x;
}

double pilot_power(const ScenarioConfig& config, const ChannelRealization& realization) {
  std::vector<double> b(realization.betas.data(), realization.betas.data() + realization.betas.size());
  std::sort(b.begin(), b.end());
  const std::size_t n = b.size();
  const double median = n % 2 == 1 ? b[n / 2] : 0.5 * (b[n / 2 - 1] + b[n / 2]);
  return std::pow(10.0, config.pilot_snr_db / 10.0) * config.noise_power_w / median;
}

PilotObservation transmit_pilots(const ScenarioConfig& config, const ChannelRealization& realization,
                                 int pilot_length) {
  const auto& H = realization.channels;
  const int U = H.num_users();
  const int Nt = H.num_antennas();
  const CMat x = orthogonal_pilots(U, pilot_length);

  PilotObservation obs;
  obs.pilot_power = pilot_power(config, realization);
  obs.noise_power = config.noise_power_w;
  obs.pilot_length = pilot_length;

  std::mt19937_64 rng(derive_seed(realization.drop_seed, static_cast<std::uint64_t>(Stream::kPilotNoise)));
  std::normal_distribution<double> gauss(0.0, std::sqrt(config.noise_power_w / 2.0));
  const double amplitude = std::sqrt(obs.pilot_power);
  for (int k = 0; k < H.num_aps(); ++k) {
    CMat hk(Nt, U);
    for (int u = 0; u < U; ++u) hk.col(u) = H.at(k, u);
    CMat y = amplitude * hk * x;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += cd(gauss(rng), gauss(rng));
    obs.rx.push_back(std::move(y));
  }
  return obs;
}

CMat ls_channel_estimate(const CMat& pilot_rx, int num_users, double pilot_power) {
  const int tau = static_cast<int>(pilot_rx.cols());
  const CMat x = orthogonal_pilots(num_users, tau);
  return pilot_rx * x.adjoint() / (tau * std::sqrt(pilot_power));
}

std::vector<double> aoa_grid(int grid_points) {
  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  for (int g = 0; g < grid_points; ++g) grid[static_cast<std::size_t>(g)] = -kPi / 2 + kPi * g / (grid_points - 1);
  return grid;
}

std::vector<double> estimate_aoa(const CMat& snapshots, int grid_points) {
  if (grid_points < 2) throw Error(Errc::kInvalidArgument, "grid_points must be at least 2");
  const int Nt = static_cast<int>(snapshots.rows());
  for (Eigen::Index u = 0; u < snapshots.cols(); ++u) {
    if (snapshots.col(u).squaredNorm() == 0.0) {
      throw Error(Errc::kDegenerateSnapshot, "snapshot " + std::to_string(u) + " is all zero");
    }
  }
  const auto grid = aoa_grid(grid_points);
  CMat steering(Nt, grid_points);
  for (int g = 0; g < grid_points; ++g) steering.col(g) = steering_vector(grid[static_cast<std::size_t>(g)], Nt);
  const Eigen::MatrixXd spectrum = (steering.adjoint() * snapshots).cwiseAbs2();

  std::vector<double> theta_hat;
  for (Eigen::Index u = 0; u < spectrum.cols(); ++u) {
    Eigen::Index best = 0;
    for (Eigen::Index g = 1; g < spectrum.rows(); ++g) {
      if (spectrum(g, u) > spectrum(best, u)) best = g;
    }
    theta_hat.push_back(grid[static_cast<std::size_t>(best)]);
  }
  return theta_hat;
}

CMat aoa_assisted_estimate(const CMat& ls_estimates, const std::vector<double>& theta_hat) {
  if (static_cast<Eigen::Index>(theta_hat.size()) != ls_estimates.cols()) {
    throw Error(Errc::kInvalidArgument, "one angle per estimated user is required");
  }
  const int Nt = static_cast<int>(ls_estimates.rows());
  CMat out(ls_estimates.rows(), ls_estimates.cols());
  for (Eigen::Index u = 0; u < ls_estimates.cols(); ++u) {
    const CVec a = steering_vector(theta_hat[static_cast<std::size_t>(u)], Nt);
    const cd coeff = a.dot(ls_estimates.col(u)) / static_cast<double>(Nt);  // a^H h / Nt
    out.col(u) = coeff * a;
  }
  return out;
}

ApAssignment select_aps(const Eigen::MatrixXd& est_gains, int aps_per_user) {
  const int K = static_cast<int>(est_gains.rows());
  if (aps_per_user < 1 || aps_per_user > K) throw Error(Errc::kInvalidArgument, "need 1 <= L <= K");
  ApAssignment assignment;
  for (Eigen::Index u = 0; u < est_gains.cols(); ++u) {
    std::vector<int> order(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) order[static_cast<std::size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return est_gains(a, u) > est_gains(b, u); });
    order.resize(static_cast<std::size_t>(aps_per_user));
    std::sort(order.begin(), order.end());
    assignment.push_back(std::move(order));
  }
  return assignment;
}

std::vector<int> serving_union(const ApAssignment& assignment) {
  std::set<int> aps;
  for (const auto& per_user : assignment) aps.insert(per_user.begin(), per_user.end());
  return {aps.begin(), aps.end()};
}

Eigen::VectorXd PrecodeResult::per_ap_power() const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(stacked_aps.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    for (Eigen::Index u = 0; u < directions.cols(); ++u) {
      p(i) += power(u) * directions.block(i * num_antennas, u, num_antennas, 1).squaredNorm();
    }
  }
  return p;
}

namespace {

// Equal split of the stacked APs' total budget, then a common scale-down so
// the most loaded AP sits exactly at its budget. Directions are untouched.
void allocate_power(PrecodeResult& result, const ScenarioConfig& config) {
  const auto U = result.directions.cols();
  const double total = config.tx_power_per_ap_w * static_cast<double>(result.stacked_aps.size());
  result.power = Eigen::VectorXd::Constant(U, total / static_cast<double>(U));
  for (Eigen::Index u = 0; u < U; ++u) {
    if (result.directions.col(u).squaredNorm() == 0.0) result.power(u) = 0.0;
  }
  const double worst = result.per_ap_power().maxCoeff() / config.tx_power_per_ap_w;
  if (worst > 1.0) result.power /= worst;
}

void normalize_columns(CMat& w) {
  for (Eigen::Index u = 0; u < w.cols(); ++u) {
    const double n = w.col(u).norm();
    if (n > 0.0) w.col(u) /= n;
  }
}

// Moore-Penrose inverse of a full-row-rank wide matrix via SVD.
CMat right_pseudo_inverse(const CMat& h, bool& rank_ok) {
  Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  rank_ok = s.size() == h.rows() && s(0) > 0.0 && s(s.size() - 1) / s(0) >= kRankTolerance;
  if (!rank_ok) return {};
  return svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace

PrecodeResult zf_precoder(const CMat& stacked_estimate, const ApAssignment& assignment,
                          const std::vector<int>& stacked_aps, const ScenarioConfig& config) {
  if (stacked_estimate.rows() > stacked_estimate.cols()) {
    throw Error(Errc::kRankDeficient, "U exceeds the stacked antenna count");
  }
  bool rank_ok = false;
  CMat w = right_pseudo_inverse(stacked_estimate, rank_ok);
  if (!rank_ok) throw Error(Errc::kRankDeficient, "channel matrix is ill-conditioned");
  normalize_columns(w);

  PrecodeResult result;
  result.directions = std::move(w);
  result.assignment = assignment;
  result.stacked_aps = stacked_aps;
  result.num_antennas = config.num_antennas;
  allocate_power(result, config);
  return result;
}

PrecodeResult regularized_zf_precoder(const CMat& stacked_estimate, const ApAssignment& assignment,
                                      const std::vector<int>& stacked_aps, const ScenarioConfig& config) {
  const auto U = stacked_estimate.rows();
  if (stacked_estimate.norm() == 0.0) throw Error(Errc::kRankDeficient, "channel matrix is zero");
  const double total = config.tx_power_per_ap_w * static_cast<double>(stacked_aps.size());
  const double reg = config.noise_power_w * static_cast<double>(U) / total;
  const CMat gram = stacked_estimate * stacked_estimate.adjoint() + reg * CMat::Identity(U, U);
  CMat w = stacked_estimate.adjoint() * gram.ldlt().solve(CMat::Identity(U, U));
  normalize_columns(w);

  PrecodeResult result;
  result.directions = std::move(w);
  result.assignment = assignment;
  result.stacked_aps = stacked_aps;
  result.num_antennas = config.num_antennas;
  result.regularized = true;
  allocate_power(result, config);
  return result;
}

PrecodeResult mrt_precoder(const CMat& stacked_estimate, const ApAssignment& assignment,
                           const std::vector<int>& stacked_aps, const ScenarioConfig& config) {
  CMat w = stacked_estimate.adjoint();
  for (Eigen::Index u = 0; u < w.cols(); ++u) {
    if (w.col(u).squaredNorm() == 0.0) throw Error(Errc::kZeroChannel, "user " + std::to_string(u));
  }
  normalize_columns(w);

  PrecodeResult result;
  result.directions = std::move(w);
  result.assignment = assignment;
  result.stacked_aps = stacked_aps;
  result.num_antennas = config.num_antennas;
  allocate_power(result, config);
  return result;
}

CVec dft_beam(int m, int num_antennas) {
  CVec b(num_antennas);
  const double u = 2.0 * m / num_antennas - 1.0;
  for (int n = 0; n < num_antennas; ++n) b(n) = std::polar(1.0 / std::sqrt(num_antennas), kPi * n * u);
  return b;
}

PrecodeResult hybrid_precoder(const ChannelSet& estimates, const ApAssignment& assignment,
                              const ScenarioConfig& config) {
  const int Nt = estimates.num_antennas();
  const int U = estimates.num_users();
  const auto aps = serving_union(assignment);

  CMat codebook(Nt, Nt);
  for (int m = 0; m < Nt; ++m) codebook.col(m) = dft_beam(m, Nt);

  // Analog stage: strongest codebook beam per (user, serving AP).
  std::set<std::pair<int, int>> beams;  // (ap, beam index)
  for (int u = 0; u < U; ++u) {
    for (int k : assignment[static_cast<std::size_t>(u)]) {
      const Eigen::VectorXd response = (codebook.adjoint() * estimates.at(k, u)).cwiseAbs();
      Eigen::Index best = 0;
      for (Eigen::Index m = 1; m < response.size(); ++m) {
        if (response(m) > response(best)) best = m;
      }
      beams.emplace(k, static_cast<int>(best));
    }
  }

  const auto M = static_cast<Eigen::Index>(aps.size()) * Nt;
  CMat analog = CMat::Zero(M, static_cast<Eigen::Index>(beams.size()));
  Eigen::Index j = 0;
  for (const auto& [k, m] : beams) {
    const auto block = std::lower_bound(aps.begin(), aps.end(), k) - aps.begin();
    analog.block(block * Nt, j, Nt, 1) = codebook.col(m);
    ++j;
  }

  const CMat effective = estimates.stacked(aps) * analog;  // U x J
  if (effective.norm() == 0.0) throw Error(Errc::kRankDeficient, "effective channel is zero");

  PrecodeResult result;
  CMat digital;
  bool rank_ok = false;
  if (effective.cols() >= effective.rows()) digital = right_pseudo_inverse(effective, rank_ok);
  if (!rank_ok) {
    const double total = config.tx_power_per_ap_w * static_cast<double>(aps.size());
    const double reg = config.noise_power_w * U / total;
    const CMat gram = effective * effective.adjoint() + reg * CMat::Identity(U, U);
    digital = effective.adjoint() * gram.ldlt().solve(CMat::Identity(U, U));
    result.regularized = true;
  }

  CMat w = analog * digital;
  normalize_columns(w);
  result.directions = std::move(w);
  result.assignment = assignment;
  result.stacked_aps = aps;
  result.num_antennas = Nt;
  allocate_power(result, config);
  return result;
}

RateResult sum_rate(const ChannelSet& true_channels, const PrecodeResult& precode, double noise_power) {
  const CMat h = true_channels.stacked(precode.stacked_aps);
  if (h.cols() != precode.directions.rows()) throw Error(Errc::kInvalidArgument, "precoder dimension mismatch");
  const Eigen::MatrixXd g = (h * precode.directions).cwiseAbs2();  // g(u, v) = |h_u^H w_v|^2
  const auto U = g.rows();
  RateResult out;
  out.sinr.resize(U);
  for (Eigen::Index u = 0; u < U; ++u) {
    double interference = 0.0;
    for (Eigen::Index v = 0; v < U; ++v) {
      if (v != u) interference += precode.power(v) * g(u, v);
    }
    out.sinr(u) = precode.power(u) * g(u, u) / (interference + noise_power);
    out.sum_rate += std::log2(1.0 + out.sinr(u));
  }
  return out;
}

ChainParams default_chain_params(const ScenarioConfig& config) {
  return {config.aoa_grid_points, config.pilot_length_symbols, config.ap_select_l, config.precoder};
}

PrecodeResult precode(const CMat& stacked_estimate, const ApAssignment& assignment,
                      const std::vector<int>& stacked_aps, const ScenarioConfig& config, PrecoderKind kind) {
  if (kind == PrecoderKind::kMrt) return mrt_precoder(stacked_estimate, assignment, stacked_aps, config);
  if (stacked_estimate.rows() <= stacked_estimate.cols()) {
    Eigen::JacobiSVD<CMat> svd(stacked_estimate);
    const auto& s = svd.singularValues();
    if (!(s(s.size() - 1) >= kZfConditionFloor * s(0))) {
      return regularized_zf_precoder(stacked_estimate, assignment, stacked_aps, config);
    }
  }
  try {
    return zf_precoder(stacked_estimate, assignment, stacked_aps, config);
  } catch (const Error& e) {
    if (e.code() != Errc::kRankDeficient) throw;
    return regularized_zf_precoder(stacked_estimate, assignment, stacked_aps, config);
  }
}

ChannelSet ls_estimates(const ScenarioConfig& config, const ChannelRealization& r, int pilot_length) {
  const auto obs = transmit_pilots(config, r, pilot_length);
  const auto& H = r.channels;
  ChannelSet est(H.num_aps(), H.num_users(), H.num_antennas());
  for (int k = 0; k < H.num_aps(); ++k) {
    const CMat hk = ls_channel_estimate(obs.rx[static_cast<std::size_t>(k)], H.num_users(), obs.pilot_power);
    for (int u = 0; u < H.num_users(); ++u) est.at(k, u) = hk.col(u);
  }
  return est;
}

namespace {

CMat per_ap_columns(const ChannelSet& set, int k) {
  CMat hk(set.num_antennas(), set.num_users());
  for (int u = 0; u < set.num_users(); ++u) hk.col(u) = set.at(k, u);
  return hk;
}

}  // namespace

Eigen::MatrixXd estimate_aoa_per_ap(const ChannelSet& ls, int grid_points) {
  Eigen::MatrixXd thetas(ls.num_aps(), ls.num_users());
  for (int k = 0; k < ls.num_aps(); ++k) {
    const auto t = estimate_aoa(per_ap_columns(ls, k), grid_points);
    for (int u = 0; u < ls.num_users(); ++u) thetas(k, u) = t[static_cast<std::size_t>(u)];
  }
  return thetas;
}

ChannelSet aoa_refined(const ChannelSet& ls, const Eigen::MatrixXd& theta_hat) {
  if (theta_hat.rows() != ls.num_aps() || theta_hat.cols() != ls.num_users()) {
    throw Error(Errc::kInvalidArgument, "angle matrix must be K x U");
  }
  ChannelSet est(ls.num_aps(), ls.num_users(), ls.num_antennas());
  for (int k = 0; k < ls.num_aps(); ++k) {
    std::vector<double> t(static_cast<std::size_t>(ls.num_users()));
    for (int u = 0; u < ls.num_users(); ++u) t[static_cast<std::size_t>(u)] = theta_hat(k, u);
    const CMat refined = aoa_assisted_estimate(per_ap_columns(ls, k), t);
    for (int u = 0; u < ls.num_users(); ++u) est.at(k, u) = refined.col(u);
  }
  return est;
}

PrecodeResult digital_precode(const ChannelSet& est, const ScenarioConfig& config, const ChainParams& params) {
  const auto assignment = select_aps(est.gains(), params.aps_per_user);
  const auto aps = serving_union(assignment);
  const CMat stacked = est.stacked(aps);
  return precode(stacked, assignment, aps, config, params.precoder);
}

RateResult run_drop(Chain chain, const ChannelRealization& realization, const ScenarioConfig& config,
                    const ChainParams& params) {
  switch (chain) {
    case Chain::kPerfectCsi:
      return sum_rate(realization.channels, digital_precode(realization.channels, config, params),
                      config.noise_power_w);
    case Chain::kClassical:
      return sum_rate(realization.channels,
                      digital_precode(ls_estimates(config, realization, params.pilot_length), config, params),
                      config.noise_power_w);
    case Chain::kMultiAgent: {
      const auto ls = ls_estimates(config, realization, params.pilot_length);
      return sum_rate(realization.channels, digital_precode(aoa_refined(ls, estimate_aoa_per_ap(ls, params.grid_points)), config, params),
                      config.noise_power_w);
    }
    case Chain::kSingleAgent: {
      const auto ls = ls_estimates(config, realization, params.pilot_length);
      const auto assignment = select_aps(ls.gains(), params.aps_per_user);
      return sum_rate(realization.channels, hybrid_precoder(ls, assignment, config), config.noise_power_w);
    }
  }
  throw Error(Errc::kInvalidArgument, "unknown chain");
}

std::string channels_to_csv(const ChannelRealization& realization) {
  const auto& H = realization.channels;
  std::ostringstream out;
  out.precision(17);
  out << "k,u,theta_rad,beta";
  for (int n = 0; n < H.num_antennas(); ++n) out << ",re" << n << ",im" << n;
  out << "\n";
  for (int k = 0; k < H.num_aps(); ++k) {
    for (int u = 0; u < H.num_users(); ++u) {
      out << k << ',' << u << ',' << realization.thetas(k, u) << ',' << realization.betas(k, u);
      for (int n = 0; n < H.num_antennas(); ++n) out << ',' << H.at(k, u)(n).real() << ',' << H.at(k, u)(n).imag();
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace nativeai::phy
