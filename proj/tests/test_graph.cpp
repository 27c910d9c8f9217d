// SPDX-License-Identifier: Apache-2.0
#include "gtlens/error.hpp"
#include "gtlens/graph.hpp"
#include "gtlens/linalg.hpp"
#include "gtlens/random_graph.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gtlens;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected gtlens::Error";
  return ErrorCode::Io;
}

std::vector<int> hydrogens(const MolecularGraph& g) {
  std::vector<int> out;
  for (const auto& a : g.atoms()) out.push_back(a.implicit_h);
  return out;
}

}  // namespace

TEST(ParseSmiles, Cyclopropane) {
  const auto g = parse_smiles("C1CC1");
  EXPECT_EQ(g.size(), 3);
  EXPECT_EQ(g.bonds().size(), 3u);
  EXPECT_EQ(hydrogens(g), (std::vector<int>{2, 2, 2}));
}

TEST(ParseSmiles, EthanolIsPath) {
  const auto g = parse_smiles("CCO");
  EXPECT_EQ(g.size(), 3);
  EXPECT_EQ(hydrogens(g), (std::vector<int>{3, 2, 1}));
  EXPECT_EQ(g.neighbors(1), (std::vector<int>{0, 2}));
  EXPECT_EQ(g.degree(0), 1);
  EXPECT_EQ(g.degree(2), 1);
}

TEST(ParseSmiles, BondOrdersBranchesAndRings) {
  const auto acid = parse_smiles("CC(=O)O");
  EXPECT_EQ(hydrogens(acid), (std::vector<int>{3, 0, 0, 1}));
  EXPECT_EQ(acid.bonds()[1].order, 2);
  const auto nitrile = parse_smiles("CC#N");
  EXPECT_EQ(hydrogens(nitrile), (std::vector<int>{3, 0, 0}));
  const auto benzene = parse_smiles("C1=CC=CC=C1");
  EXPECT_EQ(hydrogens(benzene), (std::vector<int>(6, 1)));
  const auto percent = parse_smiles("C%12CC%12");
  EXPECT_EQ(percent.bonds().size(), 3u);
}

TEST(ParseSmiles, HigherValenceStates) {
  EXPECT_EQ(hydrogens(parse_smiles("CS(=O)C")), (std::vector<int>{3, 0, 0, 3}));
  EXPECT_EQ(hydrogens(parse_smiles("OS(=O)(=O)O")), (std::vector<int>{1, 0, 0, 0, 1}));
  EXPECT_EQ(hydrogens(parse_smiles("COP(=O)(OC)OC"))[2], 0);
}

TEST(ParseSmiles, BracketAtoms) {
  const auto g = parse_smiles("C[NH3+]");
  EXPECT_EQ(g.atoms()[1].element, "N");
  EXPECT_EQ(g.atoms()[1].implicit_h, 3);
  EXPECT_EQ(g.atoms()[1].charge, 1);
  const auto anion = parse_smiles("CC(=O)[O-]");
  EXPECT_EQ(anion.atoms()[3].charge, -1);
  EXPECT_EQ(anion.atoms()[3].implicit_h, 0);
  EXPECT_EQ(parse_smiles("[Na+].[Cl-]").component_count(), 2);
}

TEST(ParseSmiles, Errors) {
  EXPECT_EQ(code_of([] { parse_smiles("c1ccccc1"); }), ErrorCode::Unsupported);
  EXPECT_EQ(code_of([] { parse_smiles("C*"); }), ErrorCode::Unsupported);
  EXPECT_EQ(code_of([] { parse_smiles("F/C=C/F"); }), ErrorCode::Unsupported);
  EXPECT_EQ(code_of([] { parse_smiles("[13CH4]"); }), ErrorCode::Unsupported);
  EXPECT_EQ(code_of([] { parse_smiles("C[C@H](N)O"); }), ErrorCode::Unsupported);
  EXPECT_EQ(code_of([] { parse_smiles("C1CC"); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { parse_smiles("CC(C"); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { parse_smiles("CC)C"); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { parse_smiles("CC="); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { parse_smiles(""); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { parse_smiles("CXC"); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { parse_smiles("C(F)(F)(F)(F)F"); }), ErrorCode::Valence);
  EXPECT_EQ(code_of([] { parse_smiles("O=O=O"); }), ErrorCode::Valence);
}

TEST(ParseGraphJson, Examples) {
  const auto single = parse_graph_json(R"({"atoms":[{"element":"C","implicit_h":4}],"bonds":[]})");
  EXPECT_EQ(single.size(), 1);
  EXPECT_EQ(single.atoms()[0].implicit_h, 4);
  const auto p2 = parse_graph_json(
      R"({"atoms":[{"element":"C","implicit_h":3},{"element":"O","implicit_h":1}],"bonds":[[0,1,1]]})");
  EXPECT_EQ(p2.size(), 2);
  EXPECT_EQ(p2.neighbors(0), (std::vector<int>{1}));
}

TEST(ParseGraphJson, Errors) {
  const char* two = R"({"atoms":[{"element":"C","implicit_h":3},{"element":"C","implicit_h":3}],)";
  EXPECT_EQ(code_of([&] { parse_graph_json(std::string(two) + R"("bonds":[[0,5,1]]})"); }),
            ErrorCode::Schema);
  EXPECT_EQ(code_of([&] { parse_graph_json(std::string(two) + R"("bonds":[[0,1,1],[1,0,1]]})"); }),
            ErrorCode::Schema);
  EXPECT_EQ(code_of([&] { parse_graph_json(std::string(two) + R"("bonds":[[0,0,1]]})"); }),
            ErrorCode::Schema);
  EXPECT_EQ(code_of([] { parse_graph_json(R"({"bonds":[]})"); }), ErrorCode::Schema);
  EXPECT_EQ(code_of([] { parse_graph_json(R"({"atoms":[{"implicit_h":1}],"bonds":[]})"); }),
            ErrorCode::Schema);
  EXPECT_EQ(code_of([] { parse_graph_json(R"({"atoms":[)"); }), ErrorCode::Parse);
}

TEST(ParseGraphJson, RoundTripThroughJson) {
  const auto g = parse_smiles("CC(=O)NC1=CC=C(O)C=C1");
  EXPECT_TRUE(parse_graph_json(to_graph_json(g)).same_structure(g));
}

TEST(Laplacian, ClosedForms) {
  Eigen::MatrixXi p2(2, 2);
  p2 << 1, -1, -1, 1;
  EXPECT_EQ(laplacian_int(parse_smiles("CC")), p2);
  Eigen::MatrixXi p3(3, 3);
  p3 << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  EXPECT_EQ(laplacian_int(parse_smiles("CCC")), p3);
  Eigen::MatrixXi tri(3, 3);
  tri << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  EXPECT_EQ(laplacian_int(parse_smiles("C1CC1")), tri);
  // Bond orders are ignored.
  EXPECT_EQ(laplacian_int(parse_smiles("C=C")), p2);
}

TEST(Laplacian, RowsSumToZeroExactly) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_connected_graph(1 + trial % 20, 0.3, rng);
    const Eigen::MatrixXi l = laplacian_int(g);
    EXPECT_EQ(l.rowwise().sum(), Eigen::VectorXi::Zero(g.size()));
    EXPECT_EQ(l, l.transpose());
  }
}

TEST(EigSymmetric, LaplacianExamples) {
  const auto p3 = eig_symmetric(laplacian(parse_smiles("CCC")));
  EXPECT_NEAR(p3.eigenvalues(0), 0.0, 1e-10);
  EXPECT_NEAR(p3.eigenvalues(1), 1.0, 1e-10);
  EXPECT_NEAR(p3.eigenvalues(2), 3.0, 1e-10);
  EXPECT_TRUE(p3.eigenvectors.col(1).isApprox(Eigen::Vector3d(1, 0, -1) / std::sqrt(2.0), 1e-10));
  EXPECT_TRUE(p3.eigenvectors.col(2).isApprox(Eigen::Vector3d(1, -2, 1) / std::sqrt(6.0), 1e-10));

  const auto tri = eig_symmetric(laplacian(parse_smiles("C1CC1")));
  EXPECT_NEAR(tri.eigenvalues(0), 0.0, 1e-10);
  EXPECT_NEAR(tri.eigenvalues(1), 3.0, 1e-10);
  EXPECT_NEAR(tri.eigenvalues(2), 3.0, 1e-10);
  EXPECT_NEAR(tri.eigenvalues.sum(), 6.0, 1e-10);

  const auto one = eig_symmetric(laplacian(parse_smiles("C")));
  EXPECT_EQ(one.eigenvalues(0), 0.0);
  EXPECT_EQ(one.eigenvectors(0, 0), 1.0);
}

TEST(EigSymmetric, MultiplyBackOnRandomMatrices) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int n = 1; n <= 32; ++n) {
    Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return normal(rng); });
    m = (0.5 * (m + m.transpose())).eval();
    const auto s = eig_symmetric(m);
    const Eigen::MatrixXd back = s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose();
    EXPECT_LE((back - m).cwiseAbs().maxCoeff(), 1e-8) << "n=" << n;
    EXPECT_LE((s.eigenvectors.transpose() * s.eigenvectors - Eigen::MatrixXd::Identity(n, n)).norm(), 1e-10);
    for (int i = 1; i < n; ++i) EXPECT_LE(s.eigenvalues(i - 1), s.eigenvalues(i));
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        if (std::abs(s.eigenvectors(i, k)) > 1e-10) {
          EXPECT_GT(s.eigenvectors(i, k), 0.0);
          break;
        }
      }
    }
  }
}

TEST(EigSymmetric, RejectsAsymmetricInput) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_EQ(code_of([&] { eig_symmetric(m); }), ErrorCode::Dim);
}

TEST(Laplacian, ZeroModesCountComponents) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    // Disjoint union of up to three random pieces.
    std::vector<Atom> atoms;
    std::vector<Bond> bonds;
    const int pieces = 1 + trial % 3;
    for (int p = 0; p < pieces; ++p) {
      const auto part = random_connected_graph(1 + (trial + p) % 7, 0.3, rng);
      const int offset = static_cast<int>(atoms.size());
      atoms.insert(atoms.end(), part.atoms().begin(), part.atoms().end());
      for (auto b : part.bonds()) bonds.push_back({b.i + offset, b.j + offset, b.order});
    }
    const MolecularGraph g(atoms, bonds);
    EXPECT_EQ(g.component_count(), pieces);
    const auto s = eig_symmetric(laplacian(g));
    int zeros = 0;
    for (int i = 0; i < g.size(); ++i) zeros += std::abs(s.eigenvalues(i)) < 1e-8;
    EXPECT_EQ(zeros, g.component_count());
    const auto d = bfs_distances(g);
    int reachable_from_0 = 0;
    for (int j = 0; j < g.size(); ++j) reachable_from_0 += d(0, j) != kUnreachable;
    EXPECT_EQ(reachable_from_0 == g.size(), pieces == 1);
  }
}

TEST(BfsDistances, Examples) {
  EXPECT_EQ(bfs_distances(parse_smiles("CCC"))(0, 2), 2);
  EXPECT_EQ(bfs_distances(parse_smiles("C.C"))(0, 1), kUnreachable);
  const auto tri = bfs_distances(parse_smiles("C1CC1"));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_EQ(tri(i, j), i == j ? 0 : 1);
  }
}

TEST(MolecularGraph, PermutedRelabelsNodes) {
  const auto g = parse_smiles("CCO");
  const auto p = g.permuted({2, 0, 1});
  EXPECT_EQ(p.atoms()[0].implicit_h, 2);
  EXPECT_EQ(p.atoms()[1].element, "O");
  EXPECT_EQ(p.atoms()[2].implicit_h, 3);
  EXPECT_EQ(bfs_distances(p)(2, 1), 2);
  EXPECT_TRUE(p.permuted({1, 2, 0}).same_structure(g));
}
