// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace gtlens {

/// Eigenpairs of a real symmetric matrix. Eigenvalues ascending; column i of
/// `eigenvectors` pairs with eigenvalues[i]. Each vector's first nonzero
/// component is positive. Degenerate clusters come back as some orthonormal
/// basis of the eigenspace.
struct SymmetricSpectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

/// Cyclic Jacobi. Throws E_DIM for a non-square or asymmetric (> 1e-12) input
/// and E_NO_CONVERGE after 100*n sweeps.
SymmetricSpectrum eig_symmetric(const Eigen::MatrixXd& m);

/// Eigenpairs of a general real matrix, sorted by descending modulus with
/// complex-conjugate pairs adjacent (positive imaginary part first). Vectors
/// have unit 2-norm and their largest-magnitude component is real positive.
struct GeneralSpectrum {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd eigenvectors;
};

/// Hessenberg reduction + Francis double-shift QR for the eigenvalues, inverse
/// iteration for the vectors. E_NO_CONVERGE after 50*n QR steps on a single
/// eigenvalue.
GeneralSpectrum eig_general(const Eigen::MatrixXd& m);

/// Eigenvalues only, in the order the QR iteration deflates them.
Eigen::VectorXcd hessenberg_qr_eigenvalues(const Eigen::MatrixXd& m);

}  // namespace gtlens
