// SPDX-License-Identifier: Apache-2.0
#include "gtlens/pipeline.hpp"
#include "gtlens/random_graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gtlens {

namespace {

MolecularGraph path_graph(int n) {
  std::vector<Atom> atoms(n, Atom{"C", 0, 0});
  std::vector<Bond> bonds;
  for (int i = 0; i + 1 < n; ++i) bonds.push_back({i, i + 1, 1});
  return MolecularGraph(std::move(atoms), std::move(bonds));
}

MolecularGraph triangle_graph() {
  return MolecularGraph(std::vector<Atom>(3, Atom{"C", 2, 0}), {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
}

}  // namespace

std::vector<CheckResult> run_verification(std::optional<double> tolerance_override) {
  std::vector<CheckResult> results;
  auto record = [&](std::string name, double residual, double tolerance) {
    const double tol = tolerance_override.value_or(tolerance);
    results.push_back({std::move(name), residual, tol, residual <= tol});
  };

  // Laplacian closed forms.
  {
    const auto p3 = eig_symmetric(laplacian(path_graph(3)));
    const Eigen::Vector3d expected(0.0, 1.0, 3.0);
    record("laplacian_p3_eigenvalues", (p3.eigenvalues - expected).cwiseAbs().maxCoeff(), 1e-10);
    const Eigen::Vector3d l1 = Eigen::Vector3d(1.0, 0.0, -1.0) / std::sqrt(2.0);
    const Eigen::Vector3d l2 = Eigen::Vector3d(1.0, -2.0, 1.0) / std::sqrt(6.0);
    record("laplacian_p3_eigenvectors",
           std::max((p3.eigenvectors.col(1) - l1).cwiseAbs().maxCoeff(),
                    (p3.eigenvectors.col(2) - l2).cwiseAbs().maxCoeff()),
           1e-10);
    const auto tri = eig_symmetric(laplacian(triangle_graph()));
    record("laplacian_triangle_eigenvalues",
           (tri.eigenvalues - Eigen::Vector3d(0.0, 3.0, 3.0)).cwiseAbs().maxCoeff(), 1e-10);
  }

  // Proxy-mode rollout identity, stochasticity and the trivial mode on seeded models.
  {
    std::mt19937_64 rng(20240611);
    double identity = 0.0, row_sum = 0.0, negative = 0.0, trivial = 0.0, radius = 0.0, c00 = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      SanConfig cfg;
      cfg.mode = ForwardMode::Proxy;
      cfg.layers = 1 + trial % 6;
      cfg.dim = 8;
      cfg.heads = 1;
      cfg.seed = 1000 + trial;
      const auto g = random_connected_graph(2 + trial % 11, 0.2, rng);
      const auto w = init_weights(cfg);
      const auto trace = forward(g, w, cfg);
      const Eigen::MatrixXd rolled = rollout(trace);
      const Eigen::MatrixXd predicted = std::ldexp(1.0, cfg.layers) * rolled * trace.states.front();
      identity = std::max(identity, (trace.states.back() - predicted).norm() / trace.states.back().norm());
      row_sum = std::max(row_sum, (rolled.rowwise().sum().array() - 1.0).abs().maxCoeff());
      negative = std::max(negative, -rolled.minCoeff());
      const auto rs = rollout_spectrum(rolled);
      const auto ls = laplacian_spectrum(g);
      const auto report = overlap_report(rs, ls, false);
      trivial = std::max(trivial, std::abs(rs.eigenvalues(0) - 1.0));
      radius = std::max(radius, rs.eigenvalues.cwiseAbs().maxCoeff() - 1.0);
      c00 = std::max(c00, 1.0 - report.overlap(0, 0));
    }
    record("rollout_identity_relative", identity, 1e-10);
    record("rollout_row_sums", row_sum, 1e-9);
    record("rollout_min_entry", std::max(negative, 0.0), 1e-12);
    record("trivial_eigenvalue", trivial, 1e-8);
    record("spectral_radius_excess", std::max(radius, 0.0), 1e-8);
    record("trivial_overlap_deficit", c00, 1e-6);
  }

  // Co-diagonalization: one layer with A = I - L(P3)/2.
  {
    const auto g = path_graph(3);
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3) - 0.5 * laplacian(g);
    const Eigen::MatrixXd layers[] = {a};
    const auto rs = rollout_spectrum(rollout(std::span<const Eigen::MatrixXd>(layers)));
    const auto ls = laplacian_spectrum(g);
    const auto report = overlap_report(rs, ls, false);
    record("codiagonal_eta", std::abs(report.eta - 1.0), 1e-8);
    record("codiagonal_zeta", std::abs(report.zeta - 2.0), 1e-8);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(3, [&] { return normal(rng); });
      worst = std::max(worst, filtered_convolution(rs, ls, report, x).residual);
    }
    record("codiagonal_convolution_residual", worst, 1e-8);
  }

  // General vs symmetric solver on random symmetric matrices.
  {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + trial % 16;
      Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return normal(rng); });
      m = 0.5 * (m + m.transpose()).eval();
      const auto sym = eig_symmetric(m);
      const auto gen = eig_general(m);
      std::vector<double> values(n);
      for (int i = 0; i < n; ++i) values[i] = gen.eigenvalues(i).real();
      std::sort(values.begin(), values.end());
      for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(values[i] - sym.eigenvalues(i)));
    }
    record("eig_general_vs_symmetric", worst, 1e-8);
  }

  // Expressivity closed forms.
  {
    Eigen::MatrixXd identity2 = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd corner = Eigen::MatrixXd::Zero(2, 2);
    corner(0, 0) = 2.0;
    Eigen::MatrixXd rank_one(3, 2);
    rank_one << 1.5, -2.0, 1.5, -2.0, 1.5, -2.0;
    const double worst = std::max({std::abs(expressivity_ratio(rank_one)),
                                   std::abs(expressivity_ratio(identity2) - 1.0),
                                   std::abs(expressivity_ratio(corner) - std::sqrt(0.5))});
    record("expressivity_closed_forms", worst, 1e-12);
  }

  // Probe at alpha = 0 against the least-squares normal equations.
  {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    const int samples = 80, d = 4;
    const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(samples, d, [&] { return normal(rng); });
    const Eigen::VectorXd y = x * Eigen::Vector4d(1.0, -2.0, 0.5, 3.0) +
                              Eigen::VectorXd::NullaryExpr(samples, [&] { return 0.1 * normal(rng); });
    ProbeOptions options;
    options.alpha = 0.0;
    options.seed = 11;
    const ProbeResult probe = linear_probe(x, y, options);
    Eigen::MatrixXd design(probe.n_train, d + 1);
    Eigen::VectorXd target(probe.n_train);
    for (int r = 0; r < probe.n_train; ++r) {
      design.row(r) << x.row(probe.train_rows[r]), 1.0;
      target(r) = y(probe.train_rows[r]);
    }
    const Eigen::VectorXd exact = (design.transpose() * design).ldlt().solve(design.transpose() * target);
    const double worst = std::max((exact.head(d) - probe.coefficients).cwiseAbs().maxCoeff(),
                                  std::abs(exact(d) - probe.intercept));
    record("probe_normal_equations", worst, 1e-6);
  }
  return results;
}

}  // namespace gtlens
