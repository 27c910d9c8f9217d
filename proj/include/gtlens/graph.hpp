// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gtlens {

struct Atom {
  std::string element;
  int implicit_h = 0;
  int charge = 0;

  bool operator==(const Atom&) const = default;
};

struct Bond {
  int i = 0;
  int j = 0;
  int order = 1;

  bool operator==(const Bond&) const = default;
};

/// Undirected heavy-atom graph. Construction validates indices, self-loops,
/// duplicate edges and bond orders (E_SCHEMA) and precomputes adjacency and
/// connected components.
class MolecularGraph {
 public:
  MolecularGraph() = default;
  MolecularGraph(std::vector<Atom> atoms, std::vector<Bond> bonds);

  int size() const noexcept { return static_cast<int>(atoms_.size()); }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const std::vector<Bond>& bonds() const noexcept { return bonds_; }
  const std::vector<int>& neighbors(int node) const { return adjacency_.at(node); }
  int degree(int node) const { return static_cast<int>(adjacency_.at(node).size()); }

  int component_count() const noexcept { return components_; }
  bool connected() const noexcept { return components_ <= 1; }

  /// Relabel nodes: node i of this graph becomes node perm[i] of the result.
  MolecularGraph permuted(const std::vector<int>& perm) const;

  /// Same atoms and the same undirected edge set (bond listing order ignored).
  bool same_structure(const MolecularGraph& other) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<int>> adjacency_;
  int components_ = 0;
};

/// Kekulized SMILES subset over {B,C,N,O,P,S,F,Cl,Br,I}, bracket atoms,
/// bonds -=#, branches, ring closures (digits and %nn) and '.' separators.
MolecularGraph parse_smiles(std::string_view text);

/// Graph JSON: {"atoms":[{"element","implicit_h","charge"?}],"bonds":[[i,j,order]]}.
MolecularGraph parse_graph_json(std::string_view text);
std::string to_graph_json(const MolecularGraph& g);

constexpr int kUnreachable = -1;

/// L = D - A over the unweighted adjacency, in exact integer arithmetic.
Eigen::MatrixXi laplacian_int(const MolecularGraph& g);
Eigen::MatrixXd laplacian(const MolecularGraph& g);

/// All-pairs hop distances; kUnreachable across components.
Eigen::MatrixXi bfs_distances(const MolecularGraph& g);

}  // namespace gtlens
