// SPDX-License-Identifier: Apache-2.0
#include "goalcal/bayes/calibration.hpp"
#include "goalcal/elliptic/elliptic_pair.hpp"
#include "goalcal/goal/error_estimate.hpp"
#include "goalcal/io/config.hpp"
#include "goalcal/io/export.hpp"
#include "goalcal/io/runner.hpp"
#include "goalcal/tumor/tumor_pair.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace goalcal;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<goal::ErrorSource> sources_from(const std::vector<std::string>& names) {
  std::vector<goal::ErrorSource> out;
  for (const auto& n : names) out.push_back(goal::parse_error_source(n));
  return out;
}

const std::vector<std::string> kAllSources{"exact", "first-order", "second-order"};

// Estimates release the GIL; none of them touch Python objects.
py::object compare(const goal::ModelPair& pair, const std::vector<std::string>& sources) {
  goal::ErrorEstimateReport report;
  {
    py::gil_scoped_release release;
    report = goal::compare_estimates(pair, sources_from(sources));
  }
  return to_python(report);
}

}  // namespace

PYBIND11_MODULE(_goalcal, m) {
  m.doc() = "Goal-oriented error estimates and Bayesian calibration of coarse/fine PDE model pairs";

  py::register_exception<io::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<NonconvergenceError>(m, "NonconvergenceError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<elliptic::EllipticModelPair>(m, "EllipticPair")
      .def(py::init([](int nx, int ny, double kappa0, double kappa, double alpha, const std::string& nonlinearity) {
             return elliptic::EllipticModelPair(elliptic::EllipticDiscretization::create(nx, ny), {kappa0},
                                                {kappa, alpha}, elliptic::parse_nonlinearity(nonlinearity));
           }),
           py::arg("nx") = 50, py::arg("ny") = 50, py::arg("kappa0") = 0.25, py::arg("kappa") = 0.25,
           py::arg("alpha") = 10.0, py::arg("nonlinearity") = "quadratic")
      .def_property_readonly("dimension", &elliptic::EllipticModelPair::dimension)
      .def("solve_coarse_forward", &elliptic::EllipticModelPair::solve_coarse_forward)
      .def("solve_coarse_adjoint", &elliptic::EllipticModelPair::solve_coarse_adjoint, py::arg("u0"))
      .def("solve_fine_forward", &elliptic::EllipticModelPair::solve_fine_forward)
      .def("qoi", &elliptic::EllipticModelPair::qoi, py::arg("u"))
      .def("load", &elliptic::EllipticModelPair::load)
      .def("compare_estimates", [](const elliptic::EllipticModelPair& p, const std::vector<std::string>& s) {
             return compare(p, s);
           }, py::arg("sources") = kAllSources);

  py::class_<tumor::TumorModelPair>(m, "TumorPair")
      .def(py::init([](int nx, int ny, double dt, double t_final, double lambda_p, double lambda_d, double epsilon,
                       double C, double lambda_p0, double lambda_d0, double D, double blend) {
             return tumor::TumorModelPair(
                 tumor::TumorDiscretization::create(nx, ny, tumor::TimeGrid::uniform(dt, t_final)),
                 {lambda_p0, lambda_d0, D}, {lambda_p, lambda_d, epsilon, C}, blend);
           }),
           py::arg("nx") = 50, py::arg("ny") = 50, py::arg("dt") = 0.005, py::arg("t_final") = 1.0,
           py::arg("lambda_p") = 0.5, py::arg("lambda_d") = 0.1, py::arg("epsilon") = 0.01, py::arg("C") = 1.0,
           py::arg("lambda_p0") = 0.2, py::arg("lambda_d0") = 0.1, py::arg("D") = 0.05, py::arg("blend") = 1.0)
      .def_property_readonly("dimension", &tumor::TumorModelPair::dimension)
      .def_property_readonly("n_steps", [](const tumor::TumorModelPair& p) { return p.discretization().grid().n_steps; })
      .def("solve_coarse_forward", &tumor::TumorModelPair::solve_coarse_forward)
      .def("solve_fine_forward", &tumor::TumorModelPair::solve_fine_forward)
      .def("qoi", &tumor::TumorModelPair::qoi, py::arg("u"))
      .def("compare_estimates", [](const tumor::TumorModelPair& p, const std::vector<std::string>& s) {
             return compare(p, s);
           }, py::arg("sources") = kAllSources);

  m.def("parse_config", [](const std::filesystem::path& path) { return to_python(io::to_json(io::parse_config(path))); },
        py::arg("path"), "Validated config with defaults filled in, as a dict.");

  m.def(
      "run",
      [](const std::string& command, const std::filesystem::path& config, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> out, std::function<void(const std::string&)> log) {
        const auto cfg = io::parse_config(config);
        io::RunOptions options;
        options.command = io::parse_command(command);
        options.seed = seed;
        options.output_dir = std::move(out);
        if (log) {
          options.log = [log](const std::string& line) {
            py::gil_scoped_acquire acquire;
            log(line);
          };
        }
        io::RunManifest manifest;
        {
          py::gil_scoped_release release;
          manifest = io::run_experiment(cfg, options);
        }
        return to_python(manifest);
      },
      py::arg("command"), py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
      py::arg("log") = py::none(), "Runs verify, order-study or calibrate and returns the manifest.");

  m.def("git_blob_hash", [](const py::bytes& data) { return io::git_blob_hash(std::string(data)); }, py::arg("data"));
}
