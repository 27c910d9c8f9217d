// SPDX-License-Identifier: Apache-2.0
#include "gtlens/random_graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace gtlens {

MolecularGraph random_connected_graph(int atoms, double extra, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Bond> bonds;
  std::set<std::pair<int, int>> edges;
  std::vector<int> degree(atoms, 0);
  for (int i = 1; i < atoms; ++i) {
    const int parent = std::uniform_int_distribution<int>(0, i - 1)(rng);
    bonds.push_back({parent, i, 1});
    edges.emplace(parent, i);
    ++degree[parent];
    ++degree[i];
  }
  for (int i = 0; i < atoms; ++i) {
    for (int j = i + 1; j < atoms; ++j) {
      if (edges.count({i, j}) || degree[i] >= 4 || degree[j] >= 4) continue;
      if (unit(rng) < extra) {
        bonds.push_back({i, j, 1});
        edges.emplace(i, j);
        ++degree[i];
        ++degree[j];
      }
    }
  }
  static constexpr const char* kElements[] = {"C", "C", "C", "N", "O"};
  static constexpr int kValence[] = {4, 4, 4, 3, 2};
  std::vector<Atom> list(atoms);
  for (int i = 0; i < atoms; ++i) {
    int pick = std::uniform_int_distribution<int>(0, 4)(rng);
    if (kValence[pick] < degree[i]) pick = 0;
    list[i] = Atom{kElements[pick], std::max(0, kValence[pick] - degree[i]), 0};
  }
  return MolecularGraph(std::move(list), std::move(bonds));
}

std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

Eigen::MatrixXd random_softmax_attention(int n, double spread, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> logit(-spread, spread);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = logit(rng);
    const double top = a.row(i).maxCoeff();
    a.row(i) = (a.row(i).array() - top).exp().matrix();
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

}  // namespace gtlens
