// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gtlens/graph.hpp"
#include "gtlens/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace gtlens {

// --- latent expressivity -----------------------------------------------------

/// sqrt(|M|_1 |M|_inf) with induced (max column / max row abs sum) norms.
double composite_norm(const Eigen::MatrixXd& m);

/// M minus its closest rank-one "all rows equal" matrix in Frobenius norm,
/// i.e. the column means subtracted from every row.
Eigen::MatrixXd rank_one_residual(const Eigen::MatrixXd& m);

/// |res(X)|_{1,inf} / |X|_{1,inf}; 0 when all rows coincide (relative 1e-12).
/// Throws E_DEGENERATE for the zero matrix.
double expressivity_ratio(const Eigen::MatrixXd& x);

struct ExpressivityTrace {
  std::vector<double> rho;  // one entry per layer 1..L
};

/// Atom rows only unless include_class_token is set.
ExpressivityTrace expressivity(const LayerTrace& trace, bool include_class_token = false);

// --- neighbour sensitivity ---------------------------------------------------

struct SensitivityOptions {
  int max_hop = 5;
  double step = 1e-5;
  /// 0 = hardware concurrency.
  unsigned threads = 0;
};

struct SensitivityProfile {
  std::vector<double> raw;           // S_0 .. S_K
  std::vector<double> standardized;  // (raw - min) / max(raw - min)
};

/// Full Jacobian-block norms |d GT(X)_i / d X_j|_F between atoms, by central
/// differences on the input embeddings. (N x N, row = output atom.)
Eigen::MatrixXd jacobian_block_norms(const MolecularGraph& g, const SanWeights& w, const SanConfig& cfg,
                                     double step, unsigned threads = 0);

/// Averages the block norms per hop distance k (atoms with no k-th neighbour
/// are skipped) and standardizes the profile.
SensitivityProfile sensitivity_from_blocks(const Eigen::MatrixXd& blocks, const Eigen::MatrixXi& distances,
                                           int max_hop);

SensitivityProfile sensitivity(const MolecularGraph& g, const SanWeights& w, const SanConfig& cfg,
                               const SensitivityOptions& options = {});

// --- linear probe ------------------------------------------------------------

struct ProbeOptions {
  double alpha = 0.1;
  double l1_ratio = 0.5;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;
  int max_sweeps = 10000;
};

struct ProbeResult {
  double r2 = 0.0;
  /// Coefficients and intercept in the original (unstandardized) feature units.
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double alpha = 0.0;
  double l1_ratio = 0.0;
  int n_train = 0;
  int n_test = 0;
  std::uint64_t seed = 0;
  int sweeps = 0;
  std::vector<int> train_rows;
  std::vector<int> test_rows;
};

/// Seeded half/half split of row indices (train gets floor(m/2)).
void probe_split(int samples, std::uint64_t seed, std::vector<int>& train, std::vector<int>& test);

/// Elastic net on train-standardized features by cyclic coordinate descent,
/// scored by R^2 on the held-out half.
ProbeResult linear_probe(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                         const ProbeOptions& options);

double r2_score(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted);

}  // namespace gtlens
