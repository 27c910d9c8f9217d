// SPDX-License-Identifier: Apache-2.0
#include "gtlens/error.hpp"
#include "gtlens/random_graph.hpp"
#include "gtlens/spectral.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace gtlens;

namespace {

Eigen::MatrixXd one_layer_rollout(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd layers[] = {a};
  return rollout(std::span<const Eigen::MatrixXd>(layers));
}

double eigen_residual(const Eigen::MatrixXd& m, const GeneralSpectrum& s) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    const Eigen::VectorXcd v = s.eigenvectors.col(i);
    worst = std::max(worst, (m.cast<std::complex<double>>() * v - s.eigenvalues(i) * v).norm());
  }
  return worst;
}

}  // namespace

TEST(Rollout, UniformAttention) {
  const Eigen::MatrixXd r = one_layer_rollout(Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(r(i, j), i == j ? 2.0 / 3.0 : 1.0 / 6.0, 1e-15);
  }
}

TEST(Rollout, IdentityLayers) {
  const Eigen::MatrixXd layers[] = {Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Identity(4, 4)};
  EXPECT_EQ(rollout(std::span<const Eigen::MatrixXd>(layers)), Eigen::MatrixXd::Identity(4, 4));
  EXPECT_THROW(rollout(std::span<const Eigen::MatrixXd>()), Error);
}

TEST(Rollout, P2Laplacian) {
  const auto g = parse_smiles("CC");
  const Eigen::MatrixXd r = one_layer_rollout(Eigen::MatrixXd::Identity(2, 2) - 0.5 * laplacian(g));
  Eigen::Matrix2d expected;
  expected << 0.75, 0.25, 0.25, 0.75;
  EXPECT_LE((r - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rollout, DeeperLayersMultiplyOnTheLeft) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd a1 = random_softmax_attention(4, 2.0, rng);
  const Eigen::MatrixXd a2 = random_softmax_attention(4, 2.0, rng);
  const Eigen::MatrixXd layers[] = {a1, a2};
  const Eigen::MatrixXd i4 = Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd expected = 0.25 * (i4 + a2) * (i4 + a1);
  EXPECT_LE((rollout(std::span<const Eigen::MatrixXd>(layers)) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EigGeneral, SymmetricTwoByTwo) {
  Eigen::Matrix2d m;
  m << 0.75, 0.25, 0.25, 0.75;
  const auto s = eig_general(m);
  EXPECT_NEAR(s.eigenvalues(0).real(), 1.0, 1e-14);
  EXPECT_NEAR(s.eigenvalues(1).real(), 0.5, 1e-14);
  EXPECT_NEAR(s.eigenvectors(0, 0).real(), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s.eigenvectors(1, 0).real(), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(std::abs(s.eigenvectors(0, 1)), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(std::abs(s.eigenvectors(0, 1) + s.eigenvectors(1, 1)), 0.0, 1e-12);
}

TEST(EigGeneral, Rotation) {
  Eigen::Matrix2d m;
  m << 0.0, 1.0, -1.0, 0.0;
  const auto s = eig_general(m);
  EXPECT_NEAR(s.eigenvalues(0).imag(), 1.0, 1e-14);
  EXPECT_NEAR(s.eigenvalues(1).imag(), -1.0, 1e-14);
  EXPECT_NEAR(std::abs(s.eigenvalues(0)), 1.0, 1e-14);
  EXPECT_LE(eigen_residual(m, s), 1e-12);
}

TEST(EigGeneral, IdentityAndOneByOne) {
  const auto s = eig_general(Eigen::MatrixXd::Identity(3, 3));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(s.eigenvalues(i), std::complex<double>(1.0, 0.0));
  EXPECT_LE((s.eigenvectors.adjoint() * s.eigenvectors - Eigen::MatrixXcd::Identity(3, 3)).norm(), 1e-12);
  Eigen::MatrixXd one(1, 1);
  one << -2.5;
  EXPECT_EQ(eig_general(one).eigenvalues(0), std::complex<double>(-2.5, 0.0));
}

TEST(EigGeneral, KnownNonSymmetricSpectrum) {
  Eigen::Matrix3d m;
  m << 1, 2, 3, 4, 5, 6, 0, 7, 8;
  const auto s = eig_general(m);
  EXPECT_LE(eigen_residual(m, s), 1e-10);
  EXPECT_NEAR(s.eigenvalues.sum().real(), 14.0, 1e-10);
  EXPECT_NEAR(s.eigenvalues.prod().real(), m.determinant(), 1e-9);
  // Conjugate pair stays adjacent with the positive imaginary part first.
  EXPECT_GT(s.eigenvalues(1).imag(), 0.0);
  EXPECT_EQ(s.eigenvalues(2), std::conj(s.eigenvalues(1)));
}

TEST(EigGeneral, ConventionsOnRandomMatrices) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 16;
    const Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return normal(rng); });
    const auto s = eig_general(m);
    EXPECT_LE(eigen_residual(m, s), 1e-7 * std::max(1.0, m.norm()));
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(s.eigenvectors.col(i).norm(), 1.0, 1e-12);
      if (i > 0) EXPECT_LE(std::abs(s.eigenvalues(i)), std::abs(s.eigenvalues(i - 1)) + 1e-12);
      Eigen::Index top = 0;
      s.eigenvectors.col(i).cwiseAbs().maxCoeff(&top);
      EXPECT_GE(s.eigenvectors(top, i).real(), 0.0);
      EXPECT_NEAR(s.eigenvectors(top, i).imag(), 0.0, 1e-12);
    }
  }
}

TEST(EigGeneral, MatchesSymmetricSolver) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 16;
    Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return normal(rng); });
    m = (m + m.transpose()).eval();
    const auto sym = eig_symmetric(m);
    const auto gen = eig_general(m);
    std::vector<double> values(n);
    for (int i = 0; i < n; ++i) {
      values[i] = gen.eigenvalues(i).real();
      EXPECT_EQ(gen.eigenvalues(i).imag(), 0.0);
    }
    std::sort(values.begin(), values.end());
    for (int i = 0; i < n; ++i) EXPECT_NEAR(values[i], sym.eigenvalues(i), 1e-8);
  }
}

TEST(EigGeneral, DefectiveAndRepeatedEigenvalues) {
  Eigen::Matrix3d jordan;
  jordan << 2, 1, 0, 0, 2, 1, 0, 0, 2;
  const auto s = eig_general(jordan);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(s.eigenvalues(i) - 2.0), 0.0, 1e-4);
  EXPECT_LE(eigen_residual(jordan, s), 1e-4);
  EXPECT_TRUE(s.eigenvectors.allFinite());
}

TEST(RolloutSpectrum, RandomSoftmaxInvariants) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 16;
    std::vector<Eigen::MatrixXd> layers;
    for (int l = 0; l < 1 + trial % 4; ++l) layers.push_back(random_softmax_attention(n, 3.0, rng));
    const auto rs = rollout_spectrum(rollout(std::span<const Eigen::MatrixXd>(layers)));
    EXPECT_NEAR(std::abs(rs.eigenvalues(0) - 1.0), 0.0, 1e-8);
    EXPECT_LE(rs.eigenvalues.cwiseAbs().maxCoeff(), 1.0 + 1e-8);
    const Eigen::VectorXcd constant = Eigen::VectorXcd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_LE((rs.eigenvectors.col(0) - constant).norm(), 1e-6);
    GeneralSpectrum gs{rs.eigenvalues, rs.eigenvectors};
    EXPECT_LE(eigen_residual(rs.rollout, gs), 1e-7);
  }
}

TEST(OverlapReport, SingleAtom) {
  const auto g = parse_smiles("C");
  const auto report = overlap_report(rollout_spectrum(Eigen::MatrixXd::Identity(1, 1)), laplacian_spectrum(g), false);
  EXPECT_EQ(report.eta, 0.0);
  EXPECT_EQ(report.zeta, 0.0);
  EXPECT_NEAR(report.overlap(0, 0), 1.0, 1e-12);
}

TEST(OverlapReport, CodiagonalP3) {
  const auto g = parse_smiles("CCC");
  const auto rs = rollout_spectrum(one_layer_rollout(Eigen::MatrixXd::Identity(3, 3) - 0.5 * laplacian(g)));
  const auto ls = laplacian_spectrum(g);
  EXPECT_NEAR(rs.eigenvalues(0).real(), 1.0, 1e-12);
  EXPECT_NEAR(rs.eigenvalues(1).real(), 0.75, 1e-12);
  EXPECT_NEAR(rs.eigenvalues(2).real(), 0.25, 1e-12);
  const auto report = overlap_report(rs, ls, false);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(report.overlap(i, j), i == j ? 1.0 : 0.0, 1e-10);
  }
  EXPECT_EQ(report.matched_rollout, (std::vector<int>{1, 2}));
  EXPECT_EQ(report.matched_laplacian, (std::vector<int>{1, 2}));
  EXPECT_NEAR(report.eta, 1.0, 1e-12);
  EXPECT_NEAR(report.zeta, 2.0, 1e-12);
  EXPECT_LE(report.conv_residual, 1e-10);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(3, [&] { return normal(rng); });
    EXPECT_LE(filtered_convolution(rs, ls, report, x).residual, 1e-8);
  }
}

TEST(OverlapReport, ConstantVectorIsFixedPoint) {
  std::mt19937_64 rng(6);
  const auto g = random_connected_graph(8, 0.3, rng);
  const auto rs = rollout_spectrum(one_layer_rollout(random_softmax_attention(8, 2.0, rng)));
  const auto ls = laplacian_spectrum(g);
  const auto report = overlap_report(rs, ls, false);
  EXPECT_NEAR(report.overlap(0, 0), 1.0, 1e-6);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(8, 1.0 / std::sqrt(8.0));
  const auto conv = filtered_convolution(rs, ls, report, x);
  EXPECT_LE(conv.residual, 1e-10);
  EXPECT_LE((conv.approx - x).norm(), 1e-10);
}

TEST(OverlapReport, EmptyMatchKeepsOnlyTrivialTerm) {
  std::mt19937_64 rng(13);
  const auto g = random_connected_graph(9, 0.2, rng);
  const auto rs = rollout_spectrum(one_layer_rollout(random_softmax_attention(9, 4.0, rng)));
  const auto ls = laplacian_spectrum(g);
  const auto report = overlap_report(rs, ls, false, 1.01);
  EXPECT_TRUE(report.matched_rollout.empty());
  EXPECT_EQ(report.eta, 0.0);
  EXPECT_EQ(report.zeta, 0.0);
  Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(9, [&] { return std::normal_distribution<double>()(rng); });
  x.array() -= x.mean();
  const auto conv = filtered_convolution(rs, ls, report, x);
  EXPECT_LE(conv.approx.norm(), 1e-12);
  EXPECT_NEAR(conv.residual, 1.0, 1e-12);
}

TEST(OverlapReport, Invariants) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 12;
    const auto g = random_connected_graph(n, 0.3, rng);
    std::vector<Eigen::MatrixXd> layers;
    for (int l = 0; l < 1 + trial % 3; ++l) layers.push_back(random_softmax_attention(n, 2.0, rng));
    const auto rs = rollout_spectrum(rollout(std::span<const Eigen::MatrixXd>(layers)));
    const auto report = overlap_report(rs, laplacian_spectrum(g), false);
    EXPECT_GE(report.overlap.minCoeff(), 0.0);
    EXPECT_LE(report.overlap.maxCoeff(), 1.0 + 1e-9);
    for (int j = 0; j < n; ++j) EXPECT_LE(report.overlap.col(j).norm(), 1.0 + 1e-8);
    EXPECT_GE(report.eta, 0.0);
    EXPECT_LE(report.eta, 1.0);
    EXPECT_LE(report.zeta, report.eta * (n - 1) + 1e-12);
  }
}

TEST(OverlapReport, ZetaIsRelabelingInvariant) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + trial % 8;
    const auto g = random_connected_graph(n, 0.3, rng);
    const auto perm = random_permutation(n, rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
    for (int i = 0; i < n; ++i) p.indices()(i) = perm[i];
    const Eigen::MatrixXd a = random_softmax_attention(n, 2.0, rng);
    const Eigen::MatrixXd r = one_layer_rollout(a);
    const Eigen::MatrixXd rp = one_layer_rollout(p * a * p.transpose());
    const auto base = overlap_report(rollout_spectrum(r), laplacian_spectrum(g), false);
    const auto moved = overlap_report(rollout_spectrum(rp), laplacian_spectrum(g.permuted(perm)), false);
    EXPECT_NEAR(base.zeta, moved.zeta, 1e-8);
    EXPECT_NEAR(base.eta, moved.eta, 1e-8);
  }
}

TEST(OverlapReport, ZetaInvariantOnDegenerateLaplacians) {
  std::mt19937_64 rng(37);
  for (const char* smiles : {"C1CC1", "C1CCC1", "C1=CC=CC=C1", "CC(C)(C)C", "C1CC2CCC1C2"}) {
    const auto g = parse_smiles(smiles);
    const int n = g.size();
    for (int trial = 0; trial < 10; ++trial) {
      const auto perm = random_permutation(n, rng);
      Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
      for (int i = 0; i < n; ++i) p.indices()(i) = perm[i];
      const Eigen::MatrixXd a = random_softmax_attention(n, 1.0, rng);
      const auto base = overlap_report(rollout_spectrum(one_layer_rollout(a)), laplacian_spectrum(g), false);
      const auto moved = overlap_report(rollout_spectrum(one_layer_rollout(p * a * p.transpose())),
                                        laplacian_spectrum(g.permuted(perm)), false);
      EXPECT_NEAR(base.zeta, moved.zeta, 1e-8) << smiles;
      EXPECT_NEAR(base.conv_residual, moved.conv_residual, 1e-8) << smiles;
    }
  }
}

TEST(OverlapReport, ClassTokenSlicing) {
  std::mt19937_64 rng(29);
  const auto g = random_connected_graph(5, 0.3, rng);
  const auto rs = rollout_spectrum(one_layer_rollout(random_softmax_attention(6, 2.0, rng)));
  const auto report = overlap_report(rs, laplacian_spectrum(g), true);
  EXPECT_EQ(report.n, 6);
  EXPECT_EQ(report.N, 5);
  EXPECT_EQ(report.overlap.rows(), 5);
  EXPECT_EQ(report.overlap.cols(), 6);
  EXPECT_TRUE(std::isnan(report.conv_residual));
  EXPECT_THROW(filtered_convolution(rs, laplacian_spectrum(g), report, Eigen::VectorXd::Ones(5)), Error);
  EXPECT_THROW(overlap_report(rs, laplacian_spectrum(g), false), Error);
}

TEST(OverlapReport, DegenerateClusterDiagnostics) {
  const auto g = parse_smiles("C1CC1");
  const auto rs = rollout_spectrum(one_layer_rollout(Eigen::MatrixXd::Identity(3, 3) - 0.25 * laplacian(g)));
  const auto report = overlap_report(rs, laplacian_spectrum(g), false);
  ASSERT_EQ(report.degenerate_clusters.size(), 1u);
  const auto& cluster = report.degenerate_clusters[0];
  EXPECT_EQ(cluster.laplacian_indices, (std::vector<int>{1, 2}));
  ASSERT_EQ(cluster.cosines.size(), 2u);
  for (double c : cluster.cosines) EXPECT_NEAR(c, 1.0, 1e-8);
}
