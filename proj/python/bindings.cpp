// Python bindings. Point sets cross the boundary as (n, d) arrays, one point
// per row; the C++ side stores them as d x n.
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "energy_matching/config.hpp"
#include "energy_matching/coupling.hpp"
#include "energy_matching/datasets.hpp"
#include "energy_matching/error.hpp"
#include "energy_matching/io.hpp"
#include "energy_matching/lid.hpp"
#include "energy_matching/metrics.hpp"
#include "energy_matching/sampling.hpp"
#include "energy_matching/training.hpp"

namespace py = pybind11;
using namespace energy_matching;
using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

SampleBatch cols(const Eigen::Ref<const RowPoints>& rows) { return rows.transpose(); }
RowPoints rows(const SampleBatch& cols) { return cols.transpose(); }

RunConfig config_from_dict(const py::dict& d) {
  const std::string text = py::module_::import("json").attr("dumps")(d).cast<std::string>();
  return config_from_json(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Scalar-potential generative models: training, Langevin sampling and Hessian analysis.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<PotentialNet>(m, "PotentialNet")
      .def_property_readonly("input_dim", &PotentialNet::input_dim)
      .def_property_readonly("layer_widths", &PotentialNet::layer_widths)
      .def_property_readonly("activation", [](const PotentialNet& n) { return std::string(to_string(n.activation())); })
      .def_property_readonly("output_scale", &PotentialNet::output_scale)
      .def_property("params", [](const PotentialNet& n) { return n.params(); }, &PotentialNet::set_params)
      .def("eval", [](const PotentialNet& n, const Eigen::Ref<const RowPoints>& x) { return n.eval(cols(x)); },
           py::arg("points"))
      .def("grad", [](const PotentialNet& n, const Eigen::Ref<const RowPoints>& x) { return rows(n.grad_x(cols(x))); },
           py::arg("points"))
      .def("hessian", [](const PotentialNet& n, const Eigen::VectorXd& x) { return n.hessian_x(x); }, py::arg("point"))
      .def_static("quadratic", &PotentialNet::quadratic, py::arg("factor"), py::arg("weights"))
      .def_static("isotropic_quadratic", &PotentialNet::isotropic_quadratic, py::arg("dim"));

  m.def(
      "init_net",
      [](int d, const std::vector<int>& widths, double scale, std::uint64_t seed, const std::string& act) {
        return init_net(d, widths, scale, seed, activation_from_string(act));
      },
      py::arg("input_dim"), py::arg("widths"), py::arg("output_scale") = 1.0, py::arg("seed") = 0,
      py::arg("activation") = "silu");
  m.def("save_checkpoint", [](const std::string& path, const PotentialNet& net) { save_checkpoint(path, net); });
  m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path).net; });

  m.def(
      "generate",
      [](const py::dict& cfg) { return rows(generate(config_from_dict(cfg).dataset)); },
      py::arg("config") = py::dict(), "Synthetic dataset from config keys (dataset, n, noise, data_seed, ...).");

  m.def(
      "exact_assignment",
      [](const Eigen::Ref<const RowPoints>& x, const Eigen::Ref<const RowPoints>& y) {
        const Coupling c = exact_assignment(cols(x), cols(y));
        return py::make_tuple(c.perm, c.cost);
      },
      py::arg("x"), py::arg("y"), "Optimal permutation and mean squared cost.");
  m.def(
      "sinkhorn_plan",
      [](const Eigen::Ref<const RowPoints>& x, const Eigen::Ref<const RowPoints>& y, double kappa) {
        const Coupling c = sinkhorn_plan(cols(x), cols(y), kappa);
        return py::make_tuple(c.plan, c.cost, c.converged);
      },
      py::arg("x"), py::arg("y"), py::arg("kappa"));
  m.def(
      "w2",
      [](const Eigen::Ref<const RowPoints>& x, const Eigen::Ref<const RowPoints>& y) {
        return w2_empirical(cols(x), cols(y));
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "train",
      [](const Eigen::Ref<const RowPoints>& data, const py::dict& cfg_dict, std::optional<PotentialNet> warm) {
        const RunConfig cfg = config_from_dict(cfg_dict);
        cfg.validate();
        const SampleBatch x = cols(data);
        const DataSource source = resample_from(x);
        PotentialNet net = warm ? *warm
                                : init_net(static_cast<int>(x.rows()), cfg.widths, cfg.output_scale, cfg.init_seed,
                                           cfg.activation);
        std::vector<double> losses;
        {
          py::gil_scoped_release release;
          if (cfg.phase != "phase2") {
            TrainResult r = train_phase1(source, cfg.train_config(), net);
            net = std::move(r.net);
            for (const auto& rec : r.report.records) losses.push_back(rec.loss_ot);
          }
          if (cfg.phase != "phase1") {
            TrainResult r = train_phase2(source, cfg.train_config(), net);
            net = std::move(r.net);
            for (const auto& rec : r.report.records) losses.push_back(rec.loss_ot);
          }
        }
        return py::make_tuple(net, losses);
      },
      py::arg("data"), py::arg("config") = py::dict(), py::arg("warm") = py::none(),
      "Train a potential; returns (ema net, per-iteration flow losses).");

  m.def(
      "sample",
      [](const PotentialNet& net, const py::dict& cfg_dict, std::optional<RowPoints> init) {
        const RunConfig cfg = config_from_dict(cfg_dict);
        const SampleConfig sc = cfg.sample_config();
        const CompositeEnergy energy(net, {});
        SampleBatch start;
        if (init) start = init->transpose();
        py::gil_scoped_release release;
        const SampleResult r = sample(energy, sc, init ? &start : nullptr);
        return rows(r.samples);
      },
      py::arg("net"), py::arg("config") = py::dict(), py::arg("init") = py::none());

  m.def(
      "invert",
      [](const PotentialNet& net, const Eigen::VectorXd& mask, const Eigen::VectorXd& y, double zeta,
         std::optional<Eigen::VectorXd> repel_mask, double sigma, const py::dict& cfg_dict) {
        const RunConfig cfg = config_from_dict(cfg_dict);
        std::vector<EnergyTerm> terms = {EnergyTerm::fidelity_mask(mask, y, zeta)};
        if (repel_mask) terms.push_back(EnergyTerm::interaction_mask(*repel_mask, sigma));
        const CompositeEnergy energy(net, terms);
        py::gil_scoped_release release;
        return rows(sample(energy, cfg.sample_config()).samples);
      },
      py::arg("net"), py::arg("mask"), py::arg("y"), py::arg("zeta"), py::arg("repel_mask") = py::none(),
      py::arg("sigma") = 1.0, py::arg("config") = py::dict(),
      "Conditional sampling with a masked fidelity term and optional repulsion.");

  m.def(
      "estimate_lid",
      [](const PotentialNet& net, const Eigen::Ref<const RowPoints>& points, double tau) {
        const auto reports = estimate_lid_batch(net, cols(points), tau);
        std::vector<int> lids;
        for (const auto& r : reports) lids.push_back(r.lid);
        return py::make_tuple(lids, reports.empty() ? 0.0 : reports.front().tau);
      },
      py::arg("net"), py::arg("points"), py::arg("tau") = -1.0,
      "Per-point LID and the threshold used (gap heuristic when tau < 0).");
  m.def("hessian_eigenvalues", [](const PotentialNet& net, const Eigen::VectorXd& x) {
    return hessian_spectrum(net, x).eigenvalues;
  });

  m.def(
      "landscape",
      [](const PotentialNet& net, std::array<double, 4> bounds, int resolution) {
        const LandscapeGrid g = landscape_grid(net, {bounds[0], bounds[1], bounds[2], bounds[3]}, resolution);
        return py::make_tuple(g.xs, g.ys, g.values);
      },
      py::arg("net"), py::arg("bounds"), py::arg("resolution"));

  m.def("config_keys", &config_keys);
}
