// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gtlens/graph.hpp"
#include "gtlens/linalg.hpp"
#include "gtlens/model.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace gtlens {

/// Row-stochastic attention rollout: prod_{l=L..1} (I + <A_l>_heads) / 2, with
/// deeper layers multiplied on the left. 2^L times this matrix maps X_0 to X_L
/// in proxy mode. An empty trace gives the identity.
Eigen::MatrixXd rollout(const LayerTrace& trace);

/// Same product over already head-averaged layer matrices, layer 1 first.
Eigen::MatrixXd rollout(std::span<const Eigen::MatrixXd> layer_attention);

/// Rollout matrix with its eigenpairs (descending modulus, see eig_general).
struct RolloutSpectrum {
  Eigen::MatrixXd rollout;
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd eigenvectors;
};

RolloutSpectrum rollout_spectrum(const Eigen::MatrixXd& rollout);

/// Laplacian eigenpairs, ascending.
using LaplacianSpectrum = SymmetricSpectrum;

LaplacianSpectrum laplacian_spectrum(const MolecularGraph& g);

/// Basis-independent view of one degenerate Laplacian cluster: which rollout
/// vectors lie (mostly) inside it and the cosines of the principal angles
/// between the cluster and the span of those vectors.
struct SubspaceOverlap {
  std::vector<int> laplacian_indices;
  std::vector<int> rollout_indices;
  std::vector<double> projections;  // |P_cluster a_j| for each listed rollout index
  std::vector<double> cosines;
};

struct SpectralReport {
  int n = 0;  // tokens
  int N = 0;  // atoms
  bool has_class_token = false;
  double threshold = 0.9;
  /// Laplacian eigenvectors used for the overlaps (columns). Inside a
  /// degenerate eigenspace the basis is rotated onto the left singular vectors
  /// of its overlap with the rollout modes, which fixes it independently of
  /// node labels.
  Eigen::MatrixXd laplacian_basis;
  /// overlap(i, j) = |<l_i | a_j>| with a_j restricted to atom tokens and renormalized.
  Eigen::MatrixXd overlap;
  std::vector<int> matched_laplacian;  // i >= 1 with max_j C(i, j) >= threshold
  std::vector<int> matched_rollout;    // j >= 1 with max_i C(i, j) >= threshold
  /// best_laplacian[j] = argmax_i C(i, j).
  std::vector<int> best_laplacian;
  double eta = 0.0;
  double zeta = 0.0;
  /// Relative Frobenius residual of the filtered-convolution operator against
  /// the rollout; NaN with a class token (the operator lives in atom space).
  double conv_residual = 0.0;
  double min_real_eigenvalue = 0.0;
  std::vector<SubspaceOverlap> degenerate_clusters;
};

/// Throws E_DIM unless the rollout has N (+1 with class token) rows.
SpectralReport overlap_report(const RolloutSpectrum& rs, const LaplacianSpectrum& ls,
                              bool has_class_token, double threshold = 0.9);

struct ConvolutionResult {
  Eigen::VectorXd approx;
  double residual = 0.0;
};

/// a_0 |l_0><l_0| + sum over matched rollout modes j of a_j |l_i><l_i| with i
/// the Laplacian mode j matched (real part). Atom space only.
Eigen::MatrixXd filtered_convolution_operator(const RolloutSpectrum& rs, const LaplacianSpectrum& ls,
                                              const SpectralReport& report);

/// Applies the operator above to x and compares with the rollout:
/// residual = |A x - approx| / |A x| (absolute when A x = 0). E_DIM when the
/// report carries a class token or x has the wrong length.
ConvolutionResult filtered_convolution(const RolloutSpectrum& rs, const LaplacianSpectrum& ls,
                                       const SpectralReport& report, const Eigen::VectorXd& x);

}  // namespace gtlens
