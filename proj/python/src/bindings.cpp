#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "nativeai/cli.hpp"
#include "nativeai/error.hpp"
#include "nativeai/orchestrator.hpp"

namespace py = pybind11;
using namespace nativeai;

namespace {

// nlohmann::json -> Python objects through the stdlib json module.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

phy::ScenarioConfig config_from(const std::optional<std::string>& text) {
  return text ? phy::parse_scenario_config(*text) : phy::scenario_a();
}

const kb::KnowledgeStore& builtin_store() {
  static const auto store = kb::default_knowledge_store();
  return store;
}

Scheme scheme_from(const std::string& name) {
  const auto s = parse_scheme(name);
  if (!s) throw py::value_error("unknown scheme '" + name + "'");
  return *s;
}

py::list results_to_py(const std::vector<kb::RetrievalResult>& results) {
  py::list out;
  for (const auto& r : results) out.append(to_py(agents::to_json(r)));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cell-free massive MIMO simulator with scripted multi-agent orchestration";

  py::object error = py::module_::import("builtins").attr("type")(
      "Error", py::make_tuple(py::reinterpret_borrow<py::object>(PyExc_RuntimeError)), py::dict());
  error.attr("__module__") = "nativeai";
  m.attr("Error") = error;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = py::module_::import("nativeai._core").attr("Error");
      py::object inst = type(std::string(errc_name(e.code())), e.detail());
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  m.attr("CASE_STUDY_QUERY") = kCaseStudyQuery;
  m.attr("SCHEMES") = [] {
    std::vector<std::string> names;
    for (auto s : all_schemes()) names.push_back(scheme_name(s));
    return names;
  }();

  m.def(
      "scenario_text", [](const std::string& name) {
        if (name == "a") return phy::to_config_text(phy::scenario_a());
        if (name == "b") return phy::to_config_text(phy::scenario_b());
        throw py::value_error("scenario must be 'a' or 'b'");
      },
      py::arg("name"), "Config text of a built-in scenario ('a' or 'b').");
  m.def(
      "parse_config", [](const std::string& text) { return to_py(phy::to_json(phy::parse_scenario_config(text))); },
      py::arg("text"));

  m.def(
      "orchestrate",
      [](const std::string& query, const std::optional<std::string>& config, const std::string& backend_url) {
        const auto cfg = config_from(config);
        OrchestratorOptions opts;
        opts.backend_url = backend_url;
        OrchestrationResult res;
        {
          py::gil_scoped_release release;
          res = orchestrate(query, cfg, agents::default_roster(), default_registry(cfg), builtin_store(), opts);
        }
        py::dict out;
        out["dag"] = to_py(to_json(res.dag));
        out["dag_text"] = dag_to_string(res.dag);
        out["expansions"] = res.expansions;
        out["knowledge"] = results_to_py(res.knowledge);
        out["escalations"] = res.escalations;
        out["backend_fallbacks"] = res.backend_fallbacks;
        return out;
      },
      py::arg("query") = std::string(kCaseStudyQuery), py::arg("config") = py::none(), py::arg("backend_url") = "");

  m.def(
      "run_scheme",
      [](const std::string& scheme, std::size_t drops, std::uint64_t seed, const std::optional<std::string>& config,
         double reflection_threshold) {
        const auto s = scheme_from(scheme);
        const auto cfg = config_from(config);
        OrchestratorOptions opts;
        opts.reflection_threshold = reflection_threshold;
        EpisodeReport rep;
        {
          py::gil_scoped_release release;
          rep = run_scheme(s, cfg, drops, seed, builtin_store(), opts);
        }
        return to_py(to_json(rep));
      },
      py::arg("scheme"), py::arg("drops") = 200, py::arg("seed") = 0, py::arg("config") = py::none(),
      py::arg("reflection_threshold") = 0.0);

  m.def(
      "compare",
      [](const std::vector<std::string>& schemes, std::size_t drops, std::uint64_t seed,
         const std::optional<std::string>& config) {
        std::vector<Scheme> wanted;
        for (const auto& name : schemes) wanted.push_back(scheme_from(name));
        if (wanted.empty()) wanted = all_schemes();
        const auto cfg = config_from(config);
        std::vector<EpisodeReport> reports;
        {
          py::gil_scoped_release release;
          for (auto s : all_schemes())
            if (std::find(wanted.begin(), wanted.end(), s) != wanted.end())
              reports.push_back(run_scheme(s, cfg, drops, seed, builtin_store()));
        }
        return to_py(cli::to_json(cli::make_compare_report(reports, cfg)));
      },
      py::arg("schemes") = std::vector<std::string>{}, py::arg("drops") = 200, py::arg("seed") = 0,
      py::arg("config") = py::none());

  m.def("steering_vector", &phy::steering_vector, py::arg("theta"), py::arg("num_antennas"));
  m.def("estimate_aoa", &phy::estimate_aoa, py::arg("snapshots"), py::arg("grid_points"),
        "Matched-filter AoA per snapshot column.");
  m.def(
      "channels_csv",
      [](std::uint64_t seed, const std::optional<std::string>& config) {
        return phy::channels_to_csv(phy::generate_scenario(config_from(config), seed));
      },
      py::arg("seed"), py::arg("config") = py::none());

  py::class_<kb::KnowledgeStore>(m, "KnowledgeStore")
      .def(py::init<>())
      .def_static("builtin", &kb::default_knowledge_store)
      .def_static("load", [](const std::string& path) { return kb::KnowledgeStore::load(path); }, py::arg("path"))
      .def("save", &kb::KnowledgeStore::save, py::arg("path"))
      .def(
          "add_document",
          [](kb::KnowledgeStore& s, const std::string& text, const kb::Metadata& metadata) {
            return s.add_document(kb::parse_document(text, metadata));
          },
          py::arg("text"), py::arg("metadata") = kb::Metadata{})
      .def(
          "retrieve",
          [](const kb::KnowledgeStore& s, const std::string& query, std::size_t k, std::size_t expansions) {
            return results_to_py(s.retrieve(query, kb::expand_query(query, expansions), k));
          },
          py::arg("query"), py::arg("k") = 5, py::arg("expansions") = 3)
      .def(
          "graph_query",
          [](const kb::KnowledgeStore& s, const std::string& query, std::size_t k, std::size_t expansions) {
            return results_to_py(s.graph_query(query, kb::expand_query(query, expansions), k).results);
          },
          py::arg("query"), py::arg("k") = 5, py::arg("expansions") = 3)
      .def("__len__", &kb::KnowledgeStore::size);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"nativeai"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command line entry point in-process; returns (exit_code, stdout, stderr).");
}
