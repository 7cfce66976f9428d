// Python bindings. Configurations cross the boundary as JSON text; arrays as numpy.
#include "smkl/geometry.hpp"
#include "smkl/harness.hpp"
#include "smkl/io.hpp"
#include "smkl/prox.hpp"
#include "smkl/regparam.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace smkl;

namespace {

struct PyModel {
  AdditiveModelFit fit;
  KernelDictionary dict;
  FitConfig cfg;
};

KernelDictionary dict_from(const std::string& kernels) { return dictionary_from_json(Json::parse(kernels)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse multiple kernel learning core";
  m.attr("__version__") = kVersion;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("gen_instance", [](const std::string& spec) {
    const Dataset d = gen_instance(synthetic_spec_from_json(Json::parse(spec)));
    return py::make_tuple(d.X, d.Y, truth_to_json(*d.truth).dump());
  }, py::arg("spec_json"));

  m.def("gram", [](const std::string& kernel, const PointSet& X) { return gram(kernel_from_json(Json::parse(kernel)), X).entries; },
        py::arg("kernel_json"), py::arg("X"));

  m.def("spectrum", [](const std::string& kernel, const PointSet& X) {
    const GramSpectrum s = kernel_spectrum(kernel_from_json(Json::parse(kernel)), X);
    return py::make_tuple(s.eigenvalues, s.eigenvectors);
  }, py::arg("kernel_json"), py::arg("X"));

  m.def("regularization_floor", &regularization_floor, py::arg("A"), py::arg("N"), py::arg("n"));

  m.def("gamma_hat", [](const std::vector<double>& eig, int n, double delta) { return gamma_hat(eig, n, delta); },
        py::arg("eigenvalues"), py::arg("n"), py::arg("delta"));

  m.def("eps_from_majorant", [](const std::vector<double>& eig, int n, double floor) { return eps_from_majorant(eig, n, floor); },
        py::arg("eigenvalues"), py::arg("n"), py::arg("floor"));

  m.def("eps_hat", [](const std::string& kernels, const PointSet& X, double A, int N) {
    const auto spectra = dictionary_spectra(dict_from(kernels), X);
    return eps_hat_all(spectra, A, N).eps_hat;
  }, py::arg("kernels_json"), py::arg("X"), py::arg("A") = 4.0, py::arg("N"));

  m.def("rademacher_sup", &rademacher_sup, py::arg("a"), py::arg("s"), py::arg("delta"));

  m.def("block_prox", &block_prox, py::arg("z"), py::arg("alpha"), py::arg("beta"), py::arg("s"));
  m.def("prox_objective", &prox_objective, py::arg("v"), py::arg("z"), py::arg("alpha"), py::arg("beta"), py::arg("s"));

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("active_set", [](const PyModel& p) { return p.fit.active_set; })
      .def_property_readonly("converged", [](const PyModel& p) { return p.fit.converged; })
      .def_property_readonly("iterations", [](const PyModel& p) { return p.fit.iterations; })
      .def_property_readonly("objective", [](const PyModel& p) { return p.fit.objective(); })
      .def_property_readonly("kkt_residual", [](const PyModel& p) { return p.fit.kkt_residual; })
      .def_property_readonly("eps_hat", [](const PyModel& p) { return p.fit.eps_used.eps_hat; })
      .def_property_readonly("fitted", [](const PyModel& p) { return p.fit.fitted; })
      .def_property_readonly("empirical_norms", [](const PyModel& p) { return p.fit.empirical_norms(); })
      .def("predict", [](const PyModel& p, const PointSet& X) {
        const Prediction pr = predict(p.fit, p.dict, X);
        return py::make_tuple(pr.total, pr.per_block);
      }, py::arg("X"))
      .def("to_json", [](const PyModel& p) { return model_to_json(p.fit, p.dict, p.cfg).dump(); });

  m.def("fit", [](const PointSet& X, const Vector& Y, const std::string& kernels, const std::string& cfg_json) {
    PyModel p{{}, dict_from(kernels), fit_config_from_json(Json::parse(cfg_json))};
    py::gil_scoped_release release;
    p.fit = fit(X, Y, p.dict, p.cfg);
    return p;
  }, py::arg("X"), py::arg("Y"), py::arg("kernels_json"), py::arg("config_json") = "{}");

  m.def("geometry", [](const std::vector<Matrix>& blocks, const std::vector<int>& J, double b, std::optional<int> d) {
    return geometry_report_to_json(geometry_report(whiten_blocks(blocks), J, b, d)).dump();
  }, py::arg("blocks"), py::arg("J"), py::arg("b") = 1.0, py::arg("d") = py::none());

  m.def("run_experiment", [](const std::string& plan_json) {
    const ExperimentPlan plan = plan_from_json(Json::parse(plan_json));
    ExperimentResult r;
    {
      py::gil_scoped_release release;
      r = run_experiment(plan);
    }
    std::vector<py::tuple> rows;
    for (const auto& row : r.rows) rows.push_back(py::make_tuple(row.config, row.replication, row.metric, row.value));
    return py::make_tuple(rows, r.summary.dump());
  }, py::arg("plan_json"));
}
