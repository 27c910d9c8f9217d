// SPDX-License-Identifier: Apache-2.0
#include "gtlens/error.hpp"
#include "gtlens/pipeline.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace gtlens;

PYBIND11_MODULE(_gtlens, m) {
  m.doc() = "Spectral and representational diagnostics for graph transformers on molecular graphs.";

  // Messages start with the error code, e.g. "E_SCHEMA: ...".
  py::register_exception<Error>(m, "GtlensError", PyExc_RuntimeError);

  // graph-core
  py::class_<Atom>(m, "Atom")
      .def(py::init<std::string, int, int>(), py::arg("element"), py::arg("implicit_h") = 0, py::arg("charge") = 0)
      .def_readwrite("element", &Atom::element)
      .def_readwrite("implicit_h", &Atom::implicit_h)
      .def_readwrite("charge", &Atom::charge)
      .def("__repr__", [](const Atom& a) {
        return "Atom(" + a.element + ", implicit_h=" + std::to_string(a.implicit_h) +
               ", charge=" + std::to_string(a.charge) + ")";
      });

  py::class_<MolecularGraph>(m, "MolecularGraph")
      .def(py::init([](std::vector<Atom> atoms, const std::vector<std::tuple<int, int, int>>& bonds) {
             std::vector<Bond> b;
             for (const auto& [i, j, order] : bonds) b.push_back({i, j, order});
             return MolecularGraph(std::move(atoms), std::move(b));
           }),
           py::arg("atoms"), py::arg("bonds"))
      .def_property_readonly("size", &MolecularGraph::size)
      .def("__len__", &MolecularGraph::size)
      .def_property_readonly("atoms", &MolecularGraph::atoms)
      .def_property_readonly("bonds",
                             [](const MolecularGraph& g) {
                               std::vector<std::tuple<int, int, int>> out;
                               for (const auto& b : g.bonds()) out.emplace_back(b.i, b.j, b.order);
                               return out;
                             })
      .def("neighbors", &MolecularGraph::neighbors)
      .def("degree", &MolecularGraph::degree)
      .def_property_readonly("component_count", &MolecularGraph::component_count)
      .def_property_readonly("connected", &MolecularGraph::connected)
      .def("permuted", &MolecularGraph::permuted, py::arg("perm"))
      .def("same_structure", &MolecularGraph::same_structure)
      .def("to_json", &to_graph_json);

  m.def("parse_smiles", &parse_smiles, py::arg("text"));
  m.def("parse_graph_json", &parse_graph_json, py::arg("text"));
  m.def("laplacian", &laplacian, py::arg("graph"));
  m.def("bfs_distances", &bfs_distances, py::arg("graph"));
  m.attr("UNREACHABLE") = kUnreachable;

  // linear algebra
  m.def(
      "eig_symmetric",
      [](const Eigen::MatrixXd& a) {
        auto s = eig_symmetric(a);
        return py::make_tuple(s.eigenvalues, s.eigenvectors);
      },
      py::arg("matrix"), "Ascending eigenvalues and orthonormal eigenvectors (columns).");
  m.def(
      "eig_general",
      [](const Eigen::MatrixXd& a) {
        auto s = eig_general(a);
        return py::make_tuple(s.eigenvalues, s.eigenvectors);
      },
      py::arg("matrix"), "Eigenvalues by descending modulus and unit eigenvectors (columns).");

  // san-model
  py::enum_<ForwardMode>(m, "ForwardMode").value("FULL", ForwardMode::Full).value("PROXY", ForwardMode::Proxy);

  py::class_<SanConfig>(m, "SanConfig")
      .def(py::init([](int layers, int dim, int heads, int max_dist, bool include_class_token, ForwardMode mode,
                       std::uint64_t seed) {
             SanConfig cfg;
             cfg.layers = layers;
             cfg.dim = dim;
             cfg.heads = heads;
             cfg.max_dist = max_dist;
             cfg.include_class_token = include_class_token;
             cfg.mode = mode;
             cfg.seed = seed;
             cfg.validate();
             return cfg;
           }),
           py::arg("layers") = 4, py::arg("dim") = 32, py::arg("heads") = 4, py::arg("max_dist") = 8,
           py::arg("include_class_token") = false, py::arg("mode") = ForwardMode::Full, py::arg("seed") = 0)
      .def_readwrite("layers", &SanConfig::layers)
      .def_readwrite("dim", &SanConfig::dim)
      .def_readwrite("heads", &SanConfig::heads)
      .def_readwrite("max_dist", &SanConfig::max_dist)
      .def_readwrite("include_class_token", &SanConfig::include_class_token)
      .def_readwrite("mode", &SanConfig::mode)
      .def_readwrite("seed", &SanConfig::seed)
      .def_property_readonly("head_dim", &SanConfig::head_dim)
      .def("validate", &SanConfig::validate)
      .def_static("full_scale", &SanConfig::full_scale);

  py::class_<SanWeights>(m, "SanWeights")
      .def_readonly("config", &SanWeights::config)
      .def("checksum", &SanWeights::checksum)
      .def("to_json", &weights_to_json)
      .def_static("from_json", &weights_from_json, py::arg("text"))
      .def("save", [](const SanWeights& w, const std::filesystem::path& path) { save_weights(w, path); })
      .def_static("load", &load_weights, py::arg("path"));

  py::class_<LayerTrace>(m, "LayerTrace")
      .def_readonly("has_class_token", &LayerTrace::has_class_token)
      .def_readonly("states", &LayerTrace::states)
      .def_readonly("attention", &LayerTrace::attention)
      .def_property_readonly("layers", &LayerTrace::layers)
      .def("mean_attention", &LayerTrace::mean_attention, py::arg("layer"));

  m.def("init_weights", &init_weights, py::arg("config"));
  m.def("encode", &encode, py::arg("graph"), py::arg("weights"), py::arg("config"));
  m.def("forward", &forward, py::arg("graph"), py::arg("weights"), py::arg("config"));

  // rollout-spectral
  m.def("rollout", py::overload_cast<const LayerTrace&>(&rollout), py::arg("trace"));
  m.def(
      "rollout_from_attention",
      [](const std::vector<Eigen::MatrixXd>& layers) { return rollout(std::span<const Eigen::MatrixXd>(layers)); },
      py::arg("layers"));

  py::class_<RolloutSpectrum>(m, "RolloutSpectrum")
      .def_readonly("rollout", &RolloutSpectrum::rollout)
      .def_readonly("eigenvalues", &RolloutSpectrum::eigenvalues)
      .def_readonly("eigenvectors", &RolloutSpectrum::eigenvectors);
  m.def("rollout_spectrum", &rollout_spectrum, py::arg("rollout"));

  py::class_<SpectralReport>(m, "SpectralReport")
      .def_readonly("n", &SpectralReport::n)
      .def_readonly("N", &SpectralReport::N)
      .def_readonly("has_class_token", &SpectralReport::has_class_token)
      .def_readonly("threshold", &SpectralReport::threshold)
      .def_readonly("overlap", &SpectralReport::overlap)
      .def_readonly("matched_laplacian", &SpectralReport::matched_laplacian)
      .def_readonly("matched_rollout", &SpectralReport::matched_rollout)
      .def_readonly("eta", &SpectralReport::eta)
      .def_readonly("zeta", &SpectralReport::zeta)
      .def_readonly("conv_residual", &SpectralReport::conv_residual)
      .def_readonly("min_real_eigenvalue", &SpectralReport::min_real_eigenvalue);

  m.def(
      "overlap_report",
      [](const RolloutSpectrum& rs, const MolecularGraph& g, bool has_class_token, double threshold) {
        return overlap_report(rs, laplacian_spectrum(g), has_class_token, threshold);
      },
      py::arg("spectrum"), py::arg("graph"), py::arg("has_class_token") = false, py::arg("threshold") = 0.9);
  m.def(
      "filtered_convolution",
      [](const RolloutSpectrum& rs, const MolecularGraph& g, const SpectralReport& report, const Eigen::VectorXd& x) {
        auto r = filtered_convolution(rs, laplacian_spectrum(g), report, x);
        return py::make_tuple(r.approx, r.residual);
      },
      py::arg("spectrum"), py::arg("graph"), py::arg("report"), py::arg("x"));

  // diagnostics
  m.def("composite_norm", &composite_norm, py::arg("matrix"));
  m.def("expressivity_ratio", &expressivity_ratio, py::arg("x"));
  m.def(
      "expressivity",
      [](const LayerTrace& trace, bool include_class_token) { return expressivity(trace, include_class_token).rho; },
      py::arg("trace"), py::arg("include_class_token") = false);
  m.def(
      "sensitivity",
      [](const MolecularGraph& g, const SanWeights& w, const SanConfig& cfg, int max_hop, double step) {
        SensitivityOptions options;
        options.max_hop = max_hop;
        options.step = step;
        py::gil_scoped_release release;
        const auto p = sensitivity(g, w, cfg, options);
        return std::make_pair(p.raw, p.standardized);
      },
      py::arg("graph"), py::arg("weights"), py::arg("config"), py::arg("max_hop") = 5, py::arg("step") = 1e-5,
      "Returns (raw, standardized) S_k for k = 0..max_hop.");

  py::class_<ProbeResult>(m, "ProbeResult")
      .def_readonly("r2", &ProbeResult::r2)
      .def_readonly("coefficients", &ProbeResult::coefficients)
      .def_readonly("intercept", &ProbeResult::intercept)
      .def_readonly("alpha", &ProbeResult::alpha)
      .def_readonly("l1_ratio", &ProbeResult::l1_ratio)
      .def_readonly("n_train", &ProbeResult::n_train)
      .def_readonly("n_test", &ProbeResult::n_test)
      .def_readonly("seed", &ProbeResult::seed)
      .def_readonly("train_rows", &ProbeResult::train_rows)
      .def_readonly("test_rows", &ProbeResult::test_rows);
  m.def(
      "linear_probe",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha, double l1_ratio, std::uint64_t seed) {
        ProbeOptions options;
        options.alpha = alpha;
        options.l1_ratio = l1_ratio;
        options.seed = seed;
        return linear_probe(x, y, options);
      },
      py::arg("features"), py::arg("labels"), py::arg("alpha") = 0.1, py::arg("l1_ratio") = 0.5, py::arg("seed") = 0);

  // verification
  m.def("verify", [](std::optional<double> tolerance) {
    py::list out;
    for (const auto& c : run_verification(tolerance)) {
      out.append(py::dict(py::arg("name") = c.name, py::arg("residual") = c.residual,
                          py::arg("tolerance") = c.tolerance, py::arg("passed") = c.passed));
    }
    return out;
  }, py::arg("tolerance") = py::none());

  m.attr("__version__") = std::string(kToolVersion);
}
