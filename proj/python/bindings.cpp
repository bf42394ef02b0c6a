#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "npc/cli.hpp"
#include "npc/errors.hpp"
#include "npc/experiment.hpp"
#include "npc/rl.hpp"

namespace py = pybind11;
using namespace npc;

namespace {

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int rc;
  {
    py::gil_scoped_release release;
    rc = cli::run(args, out, err);
  }
  return py::make_tuple(rc, out.str(), err.str());
}

py::list bench(const std::string& problem, int trials, std::uint64_t seed, const std::string& instance,
               const std::string& policy, int threads) {
  const ProblemKind kind = parse_problem_kind(problem);
  exp::Task task = exp::default_task(kind);
  if (!instance.empty()) task.instance = instance;
  exp::ControllerFactory factory;
  if (policy.empty()) {
    factory = exp::classic_factory(kind);
  } else {
    factory = exp::policy_factory(std::make_shared<const rl::PolicyModel>(rl::load_policy(policy)), kind);
  }
  std::vector<exp::TrialResult> results;
  {
    py::gil_scoped_release release;
    results = exp::run_trials(task, factory, seed, trials, threads);
  }
  const auto names = exp::metric_names(kind);
  py::list rows;
  for (const auto& r : results) {
    py::dict row;
    row["trial"] = r.trial;
    row["iters"] = r.iters;
    row["success"] = r.success;
    row["aborted"] = r.aborted;
    row["time_ms"] = r.time_ms;
    for (std::size_t k = 0; k < names.size() && k < r.metrics.size(); ++k) row[py::str(names[k])] = r.metrics[k];
    if (!r.diagnostic.empty()) row["diagnostic"] = r.diagnostic;
    rows.append(row);
  }
  return rows;
}

py::dict policy_info(const std::string& path) {
  const rl::PolicyModel m = rl::load_policy(path);
  py::dict d;
  d["problem"] = to_string(m.kind);
  d["budget_variant"] = to_string(m.variant);
  d["n_params"] = m.n_params();
  d["log_std"] = std::vector<double>(m.log_std.begin(), m.log_std.end());
  d["metadata"] = m.metadata_json;
  return d;
}

}  // namespace

PYBIND11_MODULE(_npc, m) {
  m.doc() = "Learned predictor-corrector schedules for homotopy solvers";

  py::register_exception<Error>(m, "NpcError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<VersionError>(m, "VersionError", PyExc_ValueError);

  m.def("run_cli", &run_cli, py::arg("args"), "Runs an npc command line; returns (exit_code, stdout, stderr).");
  m.def("bench", &bench, py::arg("problem"), py::arg("trials") = 50, py::arg("seed") = 0, py::arg("instance") = "",
        py::arg("policy") = "", py::arg("threads") = 0, "Seeded trials; one dict per trial.");
  m.def("metric_names", [](const std::string& problem) { return exp::metric_names(parse_problem_kind(problem)); });
  m.def("default_instance", [](const std::string& problem) { return exp::default_task(parse_problem_kind(problem)).instance; });
  m.def("policy_info", &policy_info, py::arg("path"));
  m.def("derive_seed", &SeededRng::derive, py::arg("master"), py::arg("index"));
}
