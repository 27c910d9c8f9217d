// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gtlens/graph.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace gtlens {

/// Random spanning tree plus extra single bonds with probability `extra`;
/// atoms drawn from {C, N, O} with implicit hydrogens filling to valence.
MolecularGraph random_connected_graph(int atoms, double extra, std::mt19937_64& rng);

/// Random permutation of 0..n-1.
std::vector<int> random_permutation(int n, std::mt19937_64& rng);

/// Row-wise softmax of uniform(-spread, spread) logits.
Eigen::MatrixXd random_softmax_attention(int n, double spread, std::mt19937_64& rng);

}  // namespace gtlens
