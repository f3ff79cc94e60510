#include "nativeai/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nativeai/error.hpp"

namespace nativeai::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> rates) {
  std::sort(rates.begin(), rates.end());
  std::vector<std::pair<double, double>> cdf;
  const auto n = static_cast<double>(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) cdf.emplace_back(rates[i], static_cast<double>(i + 1) / n);
  return cdf;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

CompareReport make_compare_report(const std::vector<EpisodeReport>& reports, const phy::ScenarioConfig& config) {
  CompareReport out;
  out.config_digest = kb::content_hash(phy::to_config_text(config));
  std::vector<const EpisodeReport*> ordered;
  for (auto scheme : all_schemes()) {
    for (const auto& r : reports) {
      if (r.scheme == scheme) {
        ordered.push_back(&r);
        break;
      }
    }
  }
  for (const auto* r : ordered) {
    out.drops = r->per_drop_rates.size();
    out.seed = r->seed;
    out.schemes.push_back({r->scheme, mean_of(r->per_drop_rates), sample_stddev(r->per_drop_rates),
                           empirical_cdf(r->per_drop_rates)});
  }
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    for (std::size_t j = i + 1; j < ordered.size(); ++j) {
      const auto& a = ordered[i]->per_drop_rates;
      const auto& b = ordered[j]->per_drop_rates;
      if (a.size() != b.size()) continue;
      std::vector<double> diff;
      for (std::size_t d = 0; d < a.size(); ++d) diff.push_back(a[d] - b[d]);
      out.paired.push_back({ordered[i]->scheme, ordered[j]->scheme, mean_of(diff),
                            sample_stddev(diff) / std::sqrt(static_cast<double>(diff.size()))});
    }
  }
  return out;
}

json to_json(const CompareReport& r) {
  json schemes = json::array();
  for (const auto& s : r.schemes) {
    json cdf = json::array();
    for (const auto& [rate, frac] : s.cdf) cdf.push_back({{"rate_bps_hz", rate}, {"cdf", frac}});
    schemes.push_back({{"scheme", scheme_name(s.scheme)},
                       {"mean_rate_bps_hz", s.mean},
                       {"stddev_bps_hz", s.stddev},
                       {"drops", s.cdf.size()},
                       {"cdf", cdf}});
  }
  json paired = json::array();
  for (const auto& p : r.paired) {
    paired.push_back({{"a", scheme_name(p.a)},
                      {"b", scheme_name(p.b)},
                      {"mean_difference", p.mean},
                      {"standard_error", p.standard_error}});
  }
  return {{"drops", r.drops}, {"seed", r.seed}, {"config_digest", r.config_digest}, {"schemes", schemes},
          {"paired_differences", paired}};
}

std::string cdf_csv(const CompareReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "scheme,rate_bps_hz,cdf\n";
  for (const auto& s : r.schemes) {
    for (const auto& [rate, frac] : s.cdf) out << scheme_name(s.scheme) << ',' << rate << ',' << frac << '\n';
  }
  return out.str();
}

std::string summary_table(const CompareReport& r) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "scheme" << std::right << std::setw(12) << "mean" << std::setw(12) << "std"
      << std::setw(8) << "drops" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& s : r.schemes) {
    out << std::left << std::setw(14) << scheme_name(s.scheme) << std::right << std::setw(12) << s.mean
        << std::setw(12) << s.stddev << std::setw(8) << s.cdf.size() << '\n';
  }
  for (const auto& p : r.paired) {
    const double z = p.standard_error > 0.0 ? p.mean / p.standard_error : 0.0;
    out << scheme_name(p.a) << " - " << scheme_name(p.b) << ": " << p.mean << " (z " << std::setprecision(2) << z
        << ")\n"
        << std::setprecision(4);
  }
  return out.str();
}

bool parse_scheme_list(const std::string& csv, std::vector<Scheme>& out, std::string& unknown) {
  std::stringstream in(csv);
  for (std::string name; std::getline(in, name, ',');) {
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    if (name.empty()) continue;
    const auto scheme = parse_scheme(name);
    if (!scheme) {
      unknown = name;
      return false;
    }
    if (std::find(out.begin(), out.end(), *scheme) == out.end()) out.push_back(*scheme);
  }
  return true;
}

namespace {

struct CommonArgs {
  std::string config_path;
  std::size_t drops = 200;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::size_t k = 5;
  std::string backend_url;
  std::string store_path;
  double reflection_threshold = 0.0;
  std::string query = kCaseStudyQuery;
};

// Bad input that maps to a specific exit code.
struct Exit {
  int code;
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{kBadInput, "cannot read " + path};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kInvalidArgument, "cannot write " + path.string());
  out << text;
}

phy::ScenarioConfig load_config(const std::string& path) {
  if (path.empty()) return phy::scenario_a();
  const auto text = read_file(path);
  try {
    return phy::parse_scenario_config(text);
  } catch (const Error& e) {
    if (e.code() == Errc::kInvalidConfig) throw Exit{kBadInput, "invalid config " + path + ": " + e.detail()};
    throw;
  }
}

kb::KnowledgeStore load_store(const std::string& path) {
  if (path.empty()) return kb::default_knowledge_store();
  if (!fs::exists(path)) throw Exit{kBadInput, "cannot read " + path};
  return kb::KnowledgeStore::load(path);
}

std::string backend_url_or_env(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv("NATIVEAI_BACKEND_URL");
  return env == nullptr ? std::string{} : std::string(env);
}

OrchestratorOptions orchestrator_options(const CommonArgs& a, const std::string& scenario_ref) {
  OrchestratorOptions o;
  o.top_k = a.k;
  o.backend_url = backend_url_or_env(a.backend_url);
  o.reflection_threshold = a.reflection_threshold;
  o.context["scenario_ref"] = scenario_ref;
  return o;
}

std::string scenario_ref_of(const std::string& config_path) {
  return config_path.empty() ? "scenario_a" : fs::path(config_path).stem().string();
}

void print_results(std::ostream& out, const std::vector<kb::RetrievalResult>& results) {
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto line = agents::to_json(results[i]);
    line["rank"] = i + 1;
    out << line.dump() << '\n';
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cell-free massive MIMO orchestration harness"};
  app.require_subcommand(1);

  CommonArgs a;
  std::string scheme_name_arg;
  std::string schemes_arg;
  std::string out_path = "dag.json";
  std::vector<std::string> ingest_files;
  std::vector<std::string> metadata_pairs;
  std::string kb_text;
  std::size_t kb_expansions = 3;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", a.config_path, "Scenario config (key = value)");
    cmd->add_option("--seed", a.seed, "Base seed");
    cmd->add_option("--k", a.k, "Retrieval depth");
    cmd->add_option("--backend-url", a.backend_url, "Remote agent backend (env NATIVEAI_BACKEND_URL)");
    cmd->add_option("--store", a.store_path, "Knowledge store JSON (built-in corpus when omitted)");
    cmd->add_option("--query", a.query, "User query");
  };

  auto* run_cmd = app.add_subcommand("run", "Run one scheme and write report.json and drops.csv");
  add_common(run_cmd);
  run_cmd->add_option("--scheme", scheme_name_arg, "multi-agent | single-agent | classical | perfect-csi")->required();
  run_cmd->add_option("--drops", a.drops, "Channel drops");
  run_cmd->add_option("--out", a.out_dir, "Output directory");
  run_cmd->add_option("--reflection-threshold", a.reflection_threshold, "Reflect while the mean rate is below this");

  auto* compare_cmd = app.add_subcommand("compare", "Run schemes on shared drops; write compare.json and cdf.csv");
  add_common(compare_cmd);
  compare_cmd->add_option("--schemes", schemes_arg, "Comma-separated schemes (default: all four)");
  compare_cmd->add_option("--drops", a.drops, "Channel drops");
  compare_cmd->add_option("--out", a.out_dir, "Output directory");

  auto* kb_cmd = app.add_subcommand("kb", "Knowledge store management");
  kb_cmd->require_subcommand(1);
  std::string kb_store = "knowledge_store.json";
  auto* ingest_cmd = kb_cmd->add_subcommand("ingest", "Add text/markdown files to the store");
  ingest_cmd->add_option("files", ingest_files, "Documents")->required();
  ingest_cmd->add_option("--store", kb_store, "Store file");
  ingest_cmd->add_option("--meta", metadata_pairs, "key=value metadata applied to every file");
  auto* query_cmd = kb_cmd->add_subcommand("query", "Vector retrieval");
  auto* graph_cmd = kb_cmd->add_subcommand("graph-query", "Graph retrieval");
  for (auto* cmd : {query_cmd, graph_cmd}) {
    cmd->add_option("text", kb_text, "Query text")->required();
    cmd->add_option("--store", kb_store, "Store file");
    cmd->add_option("--k", a.k, "Number of results");
    cmd->add_option("--expansions", kb_expansions, "Scripted query expansions");
  }

  auto* orch_cmd = app.add_subcommand("orchestrate", "Write the finalized DAG without executing it");
  add_common(orch_cmd);
  orch_cmd->add_option("--out", out_path, "DAG JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*run_cmd) {
      const auto scheme = parse_scheme(scheme_name_arg);
      if (!scheme) throw Exit{kUnknownScheme, "unknown scheme '" + scheme_name_arg + "'"};
      const auto config = load_config(a.config_path);
      const auto store = load_store(a.store_path);
      const auto options = orchestrator_options(a, scenario_ref_of(a.config_path));
      const auto report = run_scheme(*scheme, config, a.drops, a.seed, store, options, a.query);
      write_file(fs::path(a.out_dir) / "report.json", to_json(report).dump(2) + "\n");
      write_file(fs::path(a.out_dir) / "drops.csv", drops_csv(report));
      out << scheme_name(*scheme) << ": mean sum rate " << std::fixed << std::setprecision(4) << report.mean_rate()
          << " bits/s/Hz over " << report.per_drop_rates.size() << " drops\n";
      return kOk;
    }

    if (*compare_cmd) {
      std::vector<Scheme> schemes;
      std::string unknown;
      if (!parse_scheme_list(schemes_arg, schemes, unknown)) throw Exit{kUnknownScheme, "unknown scheme '" + unknown + "'"};
      if (schemes.empty()) schemes = all_schemes();
      const auto config = load_config(a.config_path);
      const auto store = load_store(a.store_path);
      const auto options = orchestrator_options(a, scenario_ref_of(a.config_path));
      std::vector<EpisodeReport> reports;
      for (auto s : all_schemes()) {
        if (std::find(schemes.begin(), schemes.end(), s) != schemes.end()) {
          reports.push_back(run_scheme(s, config, a.drops, a.seed, store, options, a.query));
        }
      }
      const auto compare = make_compare_report(reports, config);
      std::string drops;
      for (const auto& r : reports) {
        auto csv = drops_csv(r);
        if (!drops.empty()) csv.erase(0, csv.find('\n') + 1);
        drops += csv;
      }
      write_file(fs::path(a.out_dir) / "compare.json", to_json(compare).dump(2) + "\n");
      write_file(fs::path(a.out_dir) / "cdf.csv", cdf_csv(compare));
      write_file(fs::path(a.out_dir) / "drops.csv", drops);
      out << summary_table(compare);
      return kOk;
    }

    if (*kb_cmd) {
      if (*ingest_cmd) {
        kb::Metadata base;
        for (const auto& kv : metadata_pairs) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) throw Exit{kBadInput, "--meta expects key=value, got " + kv};
          base[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
        auto store = fs::exists(kb_store) ? kb::KnowledgeStore::load(kb_store) : kb::KnowledgeStore{};
        for (const auto& file : ingest_files) {
          auto meta = base;
          meta["source"] = fs::path(file).filename().string();
          const auto ids = store.add_document(kb::parse_document(read_file(file), meta));
          out << json({{"file", file}, {"chunk_ids", ids}}).dump() << '\n';
        }
        store.save(kb_store);
        return kOk;
      }
      if (!fs::exists(kb_store)) throw Exit{kEmptyStore, "store " + kb_store + " is empty"};
      const auto store = kb::KnowledgeStore::load(kb_store);
      if (store.empty()) throw Exit{kEmptyStore, "store " + kb_store + " is empty"};
      const auto expansions = kb::expand_query(kb_text, kb_expansions);
      if (*query_cmd) {
        print_results(out, store.retrieve(kb_text, expansions, a.k));
      } else {
        if (store.graphs().empty()) throw Exit{kEmptyStore, "store " + kb_store + " has no graphs"};
        print_results(out, store.graph_query(kb_text, expansions, a.k).results);
      }
      return kOk;
    }

    if (*orch_cmd) {
      const auto config = load_config(a.config_path);
      const auto store = load_store(a.store_path);
      const auto options = orchestrator_options(a, scenario_ref_of(a.config_path));
      const auto registry = default_registry(config);
      const auto result = orchestrate(a.query, config, agents::default_roster(), registry, store, options);
      write_file(out_path, dag_to_string(result.dag));
      for (const auto& f : result.backend_fallbacks) err << "fallback: " << f << '\n';
      for (const auto& e : result.escalations) err << "escalation: " << e << '\n';
      out << "wrote " << out_path << " (" << result.dag.subtasks().size() << " subtasks)\n";
      return kOk;
    }
  } catch (const Exit& e) {
    err << "error: " << e.message << '\n';
    return e.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.code()) {
      case Errc::kInvalidConfig:
        return kBadInput;
      case Errc::kUnrecognizedIntent:
        return kUnrecognizedIntent;
      case Errc::kEmptyGraphStore:
        return kEmptyStore;
      default:
        return kRuntimeFailure;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kRuntimeFailure;
}

}  // namespace nativeai::cli
