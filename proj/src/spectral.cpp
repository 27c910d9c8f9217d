// SPDX-License-Identifier: Apache-2.0
#include "gtlens/spectral.hpp"

#include "gtlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gtlens {

Eigen::MatrixXd rollout(std::span<const Eigen::MatrixXd> layer_attention) {
  if (layer_attention.empty()) throw Error(ErrorCode::Dim, "rollout of zero layers needs a size");
  const Eigen::Index n = layer_attention.front().rows();
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  for (const auto& a : layer_attention) {
    if (a.rows() != n || a.cols() != n) throw Error(ErrorCode::Dim, "attention size mismatch");
    Eigen::MatrixXd step = a;
    step.diagonal().array() += 1.0;
    result = (0.5 * step) * result;
  }
  return result;
}

Eigen::MatrixXd rollout(const LayerTrace& trace) {
  if (trace.layers() == 0) return Eigen::MatrixXd::Identity(trace.tokens(), trace.tokens());
  std::vector<Eigen::MatrixXd> averaged;
  averaged.reserve(trace.layers());
  for (int l = 1; l <= trace.layers(); ++l) averaged.push_back(trace.mean_attention(l));
  return rollout(std::span<const Eigen::MatrixXd>(averaged));
}

RolloutSpectrum rollout_spectrum(const Eigen::MatrixXd& rollout) {
  GeneralSpectrum spectrum = eig_general(rollout);
  return {rollout, std::move(spectrum.eigenvalues), std::move(spectrum.eigenvectors)};
}

LaplacianSpectrum laplacian_spectrum(const MolecularGraph& g) { return eig_symmetric(laplacian(g)); }

namespace {

constexpr double kClusterGap = 1e-8;

/// Orthonormal basis of the span of the given columns (modified Gram-Schmidt).
Eigen::MatrixXcd orthonormal_columns(const Eigen::MatrixXcd& vectors) {
  std::vector<Eigen::VectorXcd> basis;
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::VectorXcd v = vectors.col(c);
    for (const auto& q : basis) v -= q * q.dot(v);
    const double norm = v.norm();
    if (norm > 1e-8) basis.push_back(v / norm);
  }
  Eigen::MatrixXcd out(vectors.rows(), static_cast<Eigen::Index>(basis.size()));
  for (size_t k = 0; k < basis.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = basis[k];
  return out;
}

/// [start, stop) ranges of Laplacian eigenvalues closer than kClusterGap.
std::vector<std::pair<Eigen::Index, Eigen::Index>> clusters_of(const Eigen::VectorXd& eigenvalues) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  const Eigen::Index count = eigenvalues.size();
  Eigen::Index start = 0;
  while (start < count) {
    Eigen::Index stop = start + 1;
    while (stop < count && eigenvalues(stop) - eigenvalues(stop - 1) < kClusterGap) ++stop;
    if (stop - start >= 2) out.emplace_back(start, stop);
    start = stop;
  }
  return out;
}

/// Rotates each degenerate Laplacian eigenspace onto the left singular
/// vectors of its overlap with the rollout modes. The result depends only on
/// the eigenspaces, so it is unchanged by node relabeling.
Eigen::MatrixXd aligned_laplacian_basis(const LaplacianSpectrum& ls, const Eigen::MatrixXcd& sliced) {
  Eigen::MatrixXd basis = ls.eigenvectors;
  for (const auto& [start, stop] : clusters_of(ls.eigenvalues)) {
    const Eigen::Index k = stop - start;
    const Eigen::MatrixXd block = basis.middleCols(start, k);
    const Eigen::MatrixXcd m = block.transpose().cast<std::complex<double>>() * sliced;
    Eigen::MatrixXd stacked(k, 2 * m.cols());
    stacked << m.real(), m.imag();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullU);
    Eigen::MatrixXd rotated = block * svd.matrixU();
    for (Eigen::Index c = 0; c < k; ++c) {
      for (Eigen::Index i = 0; i < rotated.rows(); ++i) {
        if (std::abs(rotated(i, c)) > 1e-10) {
          if (rotated(i, c) < 0.0) rotated.col(c) *= -1.0;
          break;
        }
      }
    }
    basis.middleCols(start, k) = rotated;
  }
  return basis;
}

std::vector<SubspaceOverlap> degenerate_overlaps(const Eigen::MatrixXcd& sliced, const Eigen::VectorXd& eigenvalues,
                                                 const Eigen::MatrixXd& vectors, double threshold) {
  std::vector<SubspaceOverlap> out;
  for (const auto& [start, stop] : clusters_of(eigenvalues)) {
    SubspaceOverlap cluster;
    for (Eigen::Index i = start; i < stop; ++i) cluster.laplacian_indices.push_back(static_cast<int>(i));
    const Eigen::MatrixXcd basis = vectors.middleCols(start, stop - start).cast<std::complex<double>>();
    std::vector<Eigen::Index> members;
    for (Eigen::Index j = 1; j < sliced.cols(); ++j) {
      const double projection = (basis.adjoint() * sliced.col(j)).norm();
      if (projection >= threshold) {
        cluster.rollout_indices.push_back(static_cast<int>(j));
        cluster.projections.push_back(projection);
        members.push_back(j);
      }
    }
    if (!members.empty()) {
      Eigen::MatrixXcd picked(sliced.rows(), static_cast<Eigen::Index>(members.size()));
      for (size_t k = 0; k < members.size(); ++k) picked.col(static_cast<Eigen::Index>(k)) = sliced.col(members[k]);
      const Eigen::MatrixXcd q = orthonormal_columns(picked);
      if (q.cols() > 0) {
        const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(basis.adjoint() * q);
        for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
          cluster.cosines.push_back(std::min(1.0, svd.singularValues()(k)));
        }
      }
    }
    out.push_back(std::move(cluster));
  }
  return out;
}

}  // namespace

SpectralReport overlap_report(const RolloutSpectrum& rs, const LaplacianSpectrum& ls,
                              bool has_class_token, double threshold) {
  const Eigen::Index n = rs.rollout.rows();
  const Eigen::Index atoms = ls.eigenvalues.size();
  const Eigen::Index offset = has_class_token ? 1 : 0;
  if (n != atoms + offset || rs.eigenvectors.rows() != n || rs.eigenvalues.size() != n) {
    throw Error(ErrorCode::Dim, "rollout has " + std::to_string(n) + " tokens but the graph has " +
                                    std::to_string(atoms) + " atoms" +
                                    (has_class_token ? " plus a class token" : ""));
  }

  SpectralReport report;
  report.n = static_cast<int>(n);
  report.N = static_cast<int>(atoms);
  report.has_class_token = has_class_token;
  report.threshold = threshold;

  Eigen::MatrixXcd sliced = rs.eigenvectors.bottomRows(atoms);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double norm = sliced.col(j).norm();
    if (norm < 1e-8) {
      sliced.col(j).setZero();
    } else {
      sliced.col(j) /= norm;
    }
  }
  report.laplacian_basis = aligned_laplacian_basis(ls, sliced);
  report.overlap = (report.laplacian_basis.transpose().cast<std::complex<double>>() * sliced).cwiseAbs();

  for (Eigen::Index i = 1; i < atoms; ++i) {
    if (report.overlap.row(i).maxCoeff() >= threshold) report.matched_laplacian.push_back(static_cast<int>(i));
  }
  report.best_laplacian.resize(n);
  double matched_mass = 0.0;
  double total_mass = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index best = 0;
    const double top = report.overlap.col(j).maxCoeff(&best);
    report.best_laplacian[j] = static_cast<int>(best);
    if (j == 0) continue;
    const double mass = std::abs(rs.eigenvalues(j));
    total_mass += mass;
    if (top >= threshold) {
      report.matched_rollout.push_back(static_cast<int>(j));
      matched_mass += mass;
    }
  }
  report.eta = total_mass > 0.0 ? matched_mass / total_mass : 0.0;
  report.zeta = report.eta * static_cast<double>(report.matched_laplacian.size());
  report.min_real_eigenvalue = rs.eigenvalues.real().minCoeff();
  report.degenerate_clusters = degenerate_overlaps(sliced, ls.eigenvalues, report.laplacian_basis, threshold);

  if (has_class_token) {
    report.conv_residual = std::numeric_limits<double>::quiet_NaN();
  } else {
    const Eigen::MatrixXd approx = filtered_convolution_operator(rs, ls, report);
    const double scale = rs.rollout.norm();
    report.conv_residual = (rs.rollout - approx).norm() / (scale > 0.0 ? scale : 1.0);
  }
  return report;
}

Eigen::MatrixXd filtered_convolution_operator(const RolloutSpectrum& rs, const LaplacianSpectrum& ls,
                                              const SpectralReport& report) {
  if (report.has_class_token) {
    throw Error(ErrorCode::Dim, "filtered convolution is defined in atom space only");
  }
  const Eigen::Index atoms = ls.eigenvalues.size();
  if (rs.rollout.rows() != atoms || report.laplacian_basis.cols() != atoms) {
    throw Error(ErrorCode::Dim, "rollout, Laplacian and report sizes differ");
  }
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(atoms, atoms);
  if (atoms == 0) return op;
  const Eigen::VectorXd l0 = report.laplacian_basis.col(0);
  op += rs.eigenvalues(0).real() * l0 * l0.transpose();
  for (int j : report.matched_rollout) {
    const int i = report.best_laplacian.at(j);
    if (i == 0) continue;
    const Eigen::VectorXd li = report.laplacian_basis.col(i);
    op += rs.eigenvalues(j).real() * li * li.transpose();
  }
  return op;
}

ConvolutionResult filtered_convolution(const RolloutSpectrum& rs, const LaplacianSpectrum& ls,
                                       const SpectralReport& report, const Eigen::VectorXd& x) {
  if (x.size() != ls.eigenvalues.size()) throw Error(ErrorCode::Dim, "signal length must equal N");
  const Eigen::MatrixXd op = filtered_convolution_operator(rs, ls, report);
  ConvolutionResult out;
  out.approx = op * x;
  const Eigen::VectorXd exact = rs.rollout * x;
  const double diff = (exact - out.approx).norm();
  const double scale = exact.norm();
  out.residual = scale > 0.0 ? diff / scale : diff;
  return out;
}

}  // namespace gtlens
