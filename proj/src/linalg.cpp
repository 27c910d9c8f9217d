// SPDX-License-Identifier: Apache-2.0
#include "gtlens/linalg.hpp"

#include "gtlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace gtlens {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
using cplx = std::complex<double>;

double sign_of(double magnitude, double reference) {
  return reference >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude);
}

}  // namespace

// ---------------------------------------------------------------------------
// Cyclic Jacobi

SymmetricSpectrum eig_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::Dim, "eig_symmetric needs a square matrix");
  const Eigen::Index n = m.rows();
  if (n > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::Dim, "eig_symmetric input is not symmetric within 1e-12");
  }
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, "eig_symmetric input has non-finite entries");

  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd d = a.diagonal();
  // Diagonal updates accumulate in z and are folded into b once per sweep.
  Eigen::VectorXd b = d;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);

  const long max_sweeps = 100 * std::max<long>(n, 1);
  bool converged = n <= 1;
  for (long sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += std::abs(a(p, q));
    }
    if (off == 0.0) {
      converged = true;
      break;
    }
    const double threshold = sweep < 3 ? 0.2 * off / static_cast<double>(n * n) : 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double g = 100.0 * std::abs(a(p, q));
        if (sweep > 3 && std::abs(d(p)) + g == std::abs(d(p)) &&
            std::abs(d(q)) + g == std::abs(d(q))) {
          a(p, q) = 0.0;
          continue;
        }
        if (std::abs(a(p, q)) <= threshold) continue;

        const double h = d(q) - d(p);
        double t;
        if (std::abs(h) + g == std::abs(h)) {
          t = a(p, q) / h;
        } else {
          const double theta = 0.5 * h / a(p, q);
          t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double shift = t * a(p, q);
        z(p) -= shift;
        z(q) += shift;
        d(p) -= shift;
        d(q) += shift;
        a(p, q) = 0.0;
        auto rotate = [&](double& x, double& y) {
          const double gx = x;
          const double hy = y;
          x = gx - s * (hy + gx * tau);
          y = hy + s * (gx - hy * tau);
        };
        for (Eigen::Index j = 0; j < p; ++j) rotate(a(j, p), a(j, q));
        for (Eigen::Index j = p + 1; j < q; ++j) rotate(a(p, j), a(j, q));
        for (Eigen::Index j = q + 1; j < n; ++j) rotate(a(p, j), a(q, j));
        for (Eigen::Index j = 0; j < n; ++j) rotate(v(j, p), v(j, q));
      }
    }
    b += z;
    d = b;
    z.setZero();
  }
  if (!converged) {
    throw Error(ErrorCode::NoConverge,
                "Jacobi iteration exceeded " + std::to_string(max_sweeps) + " sweeps");
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return d(i) < d(j); });

  SymmetricSpectrum out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = d(order[k]);
    Eigen::VectorXd vec = v.col(order[k]);
    vec.normalize();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(vec(i)) > 1e-10) {
        if (vec(i) < 0.0) vec = -vec;
        break;
      }
    }
    out.eigenvectors.col(k) = vec;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hessenberg + Francis QR

namespace {

void reduce_to_hessenberg(Eigen::MatrixXd& h) {
  const Eigen::Index n = h.rows();
  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    Eigen::VectorXd x = h.block(k + 1, k, n - k - 1, 1);
    const double alpha = x.norm();
    if (alpha == 0.0) continue;
    Eigen::VectorXd v = x;
    v(0) += sign_of(alpha, x(0));
    const double vnorm = v.norm();
    if (vnorm == 0.0) continue;
    v /= vnorm;
    // H <- P H P with P = I - 2 v v^T acting on rows/cols k+1..n-1.
    auto rows = h.bottomRows(n - k - 1);
    rows -= 2.0 * v * (v.transpose() * rows);
    auto cols = h.rightCols(n - k - 1);
    cols -= 2.0 * (cols * v) * v.transpose();
    h.block(k + 2, k, n - k - 2, 1).setZero();
  }
}

}  // namespace

Eigen::VectorXcd hessenberg_qr_eigenvalues(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::Dim, "eigenvalues need a square matrix");
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, "matrix has non-finite entries");
  const int n = static_cast<int>(m.rows());
  Eigen::MatrixXd a = m;
  reduce_to_hessenberg(a);
  Eigen::VectorXcd w(n);

  double anorm = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));
  }
  const int max_its = 50 * std::max(n, 1);
  int nn = n - 1;
  double t = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l > 0; --l) {
        double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) <= kEps * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      double x = a(nn, nn);
      if (l == nn) {
        w(nn--) = x + t;
      } else {
        double y = a(nn - 1, nn - 1);
        double wv = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          const double p = 0.5 * (y - x);
          const double q = p * p + wv;
          double z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            w(nn - 1) = w(nn) = x + z;
            if (z != 0.0) w(nn) = x - wv / z;
          } else {
            w(nn) = cplx(x + p, -z);
            w(nn - 1) = std::conj(w(nn));
          }
          nn -= 2;
        } else {
          if (its >= max_its) {
            throw Error(ErrorCode::NoConverge,
                        "QR iteration exceeded " + std::to_string(max_its) + " steps");
          }
          if (its > 0 && its % 10 == 0) {
            // Exceptional shift.
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            const double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            wv = -0.4375 * s * s;
          }
          ++its;
          int mm = nn - 2;
          double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
          for (; mm >= l; --mm) {
            z = a(mm, mm);
            r = x - z;
            double s = y - z;
            p = (r * s - wv) / a(mm + 1, mm) + a(mm, mm + 1);
            q = a(mm + 1, mm + 1) - z - r - s;
            r = a(mm + 2, mm + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (mm == l) break;
            const double u = std::abs(a(mm, mm - 1)) * (std::abs(q) + std::abs(r));
            const double v =
                std::abs(p) * (std::abs(a(mm - 1, mm - 1)) + std::abs(z) + std::abs(a(mm + 1, mm + 1)));
            if (u <= kEps * v) break;
          }
          for (int i = mm; i < nn - 1; ++i) {
            a(i + 2, i) = 0.0;
            if (i != mm) a(i + 2, i - 1) = 0.0;
          }
          for (int k = mm; k < nn; ++k) {
            if (k != mm) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k + 1 != nn) r = a(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            const double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
            if (s != 0.0) {
              if (k == mm) {
                if (l != mm) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k + 1 != nn) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k + 1 != nn) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l + 1 < nn);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Inverse iteration

namespace {

/// LU with partial pivoting of (M - shift I); tiny pivots are replaced by
/// `floor` so that exactly singular shifted systems still yield a solve.
class ShiftedLu {
 public:
  ShiftedLu(const Eigen::MatrixXd& m, cplx shift, double floor)
      : lu_(m.cast<cplx>()), perm_(m.rows()) {
    const Eigen::Index n = m.rows();
    for (Eigen::Index i = 0; i < n; ++i) lu_(i, i) -= shift;
    std::iota(perm_.begin(), perm_.end(), 0);
    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::Index pivot = k;
      for (Eigen::Index i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > std::abs(lu_(pivot, k))) pivot = i;
      }
      if (pivot != k) {
        lu_.row(k).swap(lu_.row(pivot));
        std::swap(perm_[k], perm_[pivot]);
      }
      if (std::abs(lu_(k, k)) < floor) lu_(k, k) = floor;
      for (Eigen::Index i = k + 1; i < n; ++i) {
        const cplx f = lu_(i, k) / lu_(k, k);
        lu_(i, k) = f;
        lu_.block(i, k + 1, 1, n - k - 1) -= f * lu_.block(k, k + 1, 1, n - k - 1);
      }
    }
  }

  Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const {
    const Eigen::Index n = lu_.rows();
    Eigen::VectorXcd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = rhs(perm_[i]);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) y(i) -= lu_(i, j) * y(j);
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      for (Eigen::Index j = i + 1; j < n; ++j) y(i) -= lu_(i, j) * y(j);
      y(i) /= lu_(i, i);
    }
    return y;
  }

 private:
  Eigen::MatrixXcd lu_;
  std::vector<Eigen::Index> perm_;
};

void fix_phase(Eigen::VectorXcd& v) {
  const double largest = v.cwiseAbs().maxCoeff();
  if (largest == 0.0) return;
  Eigen::Index pick = 0;
  while (std::abs(v(pick)) < largest * (1.0 - 1e-9)) ++pick;
  const cplx phase = std::conj(v(pick)) / std::abs(v(pick));
  v *= phase;
  v(pick) = cplx(v(pick).real(), 0.0);
}

Eigen::VectorXcd inverse_iteration(const Eigen::MatrixXd& m, cplx lambda, double scale,
                                   const std::vector<Eigen::VectorXcd>& deflate,
                                   unsigned seed) {
  const Eigen::Index n = m.rows();
  const ShiftedLu lu(m, lambda, kEps * scale);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  Eigen::VectorXcd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = cplx(unit(rng), 0.0);

  auto project = [&](Eigen::VectorXcd& y) {
    for (const auto& q : deflate) y -= q * q.dot(y);
  };
  project(x);
  if (x.norm() == 0.0) x.setOnes();
  x.normalize();

  const Eigen::MatrixXcd mc = m.cast<cplx>();
  double best_residual = std::numeric_limits<double>::infinity();
  Eigen::VectorXcd best = x;
  for (int it = 0; it < 8; ++it) {
    Eigen::VectorXcd y = lu.solve(x);
    project(y);
    const double norm = y.norm();
    if (!std::isfinite(norm) || norm == 0.0) break;
    x = y / norm;
    const double residual = (mc * x - lambda * x).norm();
    if (residual < best_residual) {
      best_residual = residual;
      best = x;
    }
    if (residual <= 64.0 * kEps * scale) break;
  }
  return best;
}

}  // namespace

GeneralSpectrum eig_general(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw Error(ErrorCode::Dim, "eig_general needs a non-empty square matrix");
  }
  const Eigen::Index n = m.rows();
  const Eigen::VectorXcd raw = hessenberg_qr_eigenvalues(m);

  // Units are single real eigenvalues or conjugate pairs (stored by the +imag member).
  struct Unit {
    cplx value;
    bool pair;
  };
  std::vector<Unit> units;
  for (Eigen::Index i = 0; i < n; ++i) {
    const cplx value = raw(i);
    if (value.imag() == 0.0) {
      units.push_back({value, false});
    } else if (value.imag() > 0.0) {
      units.push_back({value, true});
    }
  }
  std::stable_sort(units.begin(), units.end(),
                   [](const Unit& a, const Unit& b) { return std::abs(a.value) > std::abs(b.value); });

  GeneralSpectrum out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  const double scale = std::max(m.cwiseAbs().rowwise().sum().maxCoeff(), 1e-300);
  const double cluster_tol = 1e-8 * std::max(scale, 1.0);

  Eigen::Index slot = 0;
  for (const auto& unit : units) {
    // Orthogonalize against earlier vectors of the same (numerically repeated) eigenvalue.
    std::vector<Eigen::VectorXcd> deflate;
    for (Eigen::Index k = 0; k < slot; ++k) {
      if (std::abs(out.eigenvalues(k) - unit.value) < cluster_tol) {
        Eigen::VectorXcd q = out.eigenvectors.col(k);
        for (const auto& prior : deflate) q -= prior * prior.dot(q);
        const double qn = q.norm();
        if (qn > 1e-8) deflate.push_back(q / qn);
      }
    }
    Eigen::VectorXcd vec =
        inverse_iteration(m, unit.value, scale, deflate, static_cast<unsigned>(slot + 1));
    if (!deflate.empty()) {
      // A defective eigenvalue has no independent partner; fall back to the plain solve.
      const Eigen::MatrixXcd mc = m.cast<cplx>();
      if ((mc * vec - unit.value * vec).norm() > 1e-9 * std::max(scale, 1.0)) {
        vec = inverse_iteration(m, unit.value, scale, {}, static_cast<unsigned>(slot + 1));
      }
    }
    vec.normalize();
    fix_phase(vec);
    out.eigenvalues(slot) = unit.value;
    out.eigenvectors.col(slot) = vec;
    ++slot;
    if (unit.pair) {
      out.eigenvalues(slot) = std::conj(unit.value);
      out.eigenvectors.col(slot) = vec.conjugate();
      ++slot;
    }
  }
  return out;
}

}  // namespace gtlens
