#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nativeai/orchestrator.hpp"

namespace nativeai::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeFailure = 1,
  kBadInput = 2,  // invalid config, missing file, bad usage
  kUnknownScheme = 3,
  kEmptyStore = 4,
  kUnrecognizedIntent = 5,
};

// (rate, cumulative fraction) with fractions i/n over the sorted rates.
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> rates);

struct SchemeSummary {
  Scheme scheme = Scheme::kMultiAgent;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one drop
  std::vector<std::pair<double, double>> cdf;
};

// Mean and standard error of per-drop differences a - b on shared drop seeds.
struct PairedDifference {
  Scheme a = Scheme::kPerfectCsi;
  Scheme b = Scheme::kMultiAgent;
  double mean = 0.0;
  double standard_error = 0.0;
};

struct CompareReport {
  std::vector<SchemeSummary> schemes;  // canonical scheme order
  std::vector<PairedDifference> paired;
  std::size_t drops = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

CompareReport make_compare_report(const std::vector<EpisodeReport>& reports, const phy::ScenarioConfig& config);
nlohmann::json to_json(const CompareReport& report);
std::string cdf_csv(const CompareReport& report);
std::string summary_table(const CompareReport& report);

// Parse "a,b,c" into schemes. Returns the first unknown name through `unknown`.
bool parse_scheme_list(const std::string& csv, std::vector<Scheme>& out, std::string& unknown);

// Entry point behind the nativeai executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nativeai::cli
