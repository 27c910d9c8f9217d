// SPDX-License-Identifier: Apache-2.0
#include "gtlens/diagnostics.hpp"

#include "gtlens/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <thread>

namespace gtlens {

double composite_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  const double one = m.cwiseAbs().colwise().sum().maxCoeff();
  const double inf = m.cwiseAbs().rowwise().sum().maxCoeff();
  return std::sqrt(one * inf);
}

Eigen::MatrixXd rank_one_residual(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd res = m;
  res.rowwise() -= m.colwise().mean();
  return res;
}

double expressivity_ratio(const Eigen::MatrixXd& x) {
  if (x.size() == 0) throw Error(ErrorCode::Dim, "expressivity of an empty matrix");
  const double largest = x.cwiseAbs().maxCoeff();
  if (largest == 0.0) throw Error(ErrorCode::Degenerate, "token matrix is exactly zero");
  // Rows identical up to rounding: fully collapsed.
  if (((x.rowwise() - x.row(0)).cwiseAbs().maxCoeff()) <= 1e-12 * largest) return 0.0;
  return composite_norm(rank_one_residual(x)) / composite_norm(x);
}

ExpressivityTrace expressivity(const LayerTrace& trace, bool include_class_token) {
  const Eigen::Index skip = trace.has_class_token && !include_class_token ? 1 : 0;
  ExpressivityTrace out;
  for (size_t l = 1; l < trace.states.size(); ++l) {
    const Eigen::MatrixXd& x = trace.states[l];
    out.rho.push_back(expressivity_ratio(x.bottomRows(x.rows() - skip)));
  }
  return out;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd jacobian_block_norms(const MolecularGraph& g, const SanWeights& w, const SanConfig& cfg,
                                     double step, unsigned threads) {
  if (!(step > 0.0)) throw Error(ErrorCode::Dim, "finite-difference step must be positive");
  const Eigen::MatrixXd x0 = encode(g, w, cfg);
  const Eigen::MatrixXi codes = distance_codes(g, cfg);
  const Eigen::Index offset = cfg.include_class_token ? 1 : 0;
  const Eigen::Index atoms = g.size();
  const Eigen::Index d = x0.cols();

  // squared(i, j) accumulates |d GT_i / d X_j|_F^2; each source atom j owns column j.
  Eigen::MatrixXd squared = Eigen::MatrixXd::Zero(atoms, atoms);
  auto column = [&](Eigen::Index j) {
    Eigen::MatrixXd x = x0;
    for (Eigen::Index mu = 0; mu < d; ++mu) {
      const double base = x0(j + offset, mu);
      x(j + offset, mu) = base + step;
      const Eigen::MatrixXd plus = forward_embedded(x, codes, w, cfg, false).states.back();
      x(j + offset, mu) = base - step;
      const Eigen::MatrixXd minus = forward_embedded(x, codes, w, cfg, false).states.back();
      x(j + offset, mu) = base;
      const Eigen::MatrixXd diff = (plus.middleRows(offset, atoms) - minus.middleRows(offset, atoms)) / (2.0 * step);
      squared.col(j) += diff.rowwise().squaredNorm();
    }
  };

  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<Eigen::Index>(atoms, 1)));
  if (workers <= 1) {
    for (Eigen::Index j = 0; j < atoms; ++j) column(j);
  } else {
    std::atomic<Eigen::Index> next{0};
    std::vector<std::exception_ptr> failures(workers);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (Eigen::Index j = next++; j < atoms; j = next++) column(j);
        } catch (...) {
          failures[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }
  const Eigen::MatrixXd norms = squared.cwiseSqrt();
  if (!norms.allFinite()) throw Error(ErrorCode::NonFinite, "non-finite Jacobian estimate");
  return norms;
}

SensitivityProfile sensitivity_from_blocks(const Eigen::MatrixXd& blocks, const Eigen::MatrixXi& distances,
                                           int max_hop) {
  const Eigen::Index atoms = blocks.rows();
  SensitivityProfile out;
  out.raw.assign(max_hop + 1, 0.0);
  for (int k = 0; k <= max_hop; ++k) {
    double outer = 0.0;
    int counted = 0;
    for (Eigen::Index i = 0; i < atoms; ++i) {
      double inner = 0.0;
      int members = 0;
      for (Eigen::Index j = 0; j < atoms; ++j) {
        if (distances(i, j) == k) {
          inner += blocks(i, j);
          ++members;
        }
      }
      if (members == 0) continue;
      outer += inner / members;
      ++counted;
    }
    out.raw[k] = counted > 0 ? outer / counted : 0.0;
  }
  const double low = *std::min_element(out.raw.begin(), out.raw.end());
  std::vector<double> shifted(out.raw.size());
  std::transform(out.raw.begin(), out.raw.end(), shifted.begin(), [&](double v) { return v - low; });
  const double high = *std::max_element(shifted.begin(), shifted.end());
  out.standardized.resize(shifted.size());
  std::transform(shifted.begin(), shifted.end(), out.standardized.begin(),
                 [&](double v) { return high > 0.0 ? v / high : 0.0; });
  return out;
}

SensitivityProfile sensitivity(const MolecularGraph& g, const SanWeights& w, const SanConfig& cfg,
                               const SensitivityOptions& options) {
  if (options.max_hop < 0) throw Error(ErrorCode::Dim, "max_hop must be >= 0");
  const Eigen::MatrixXd blocks = jacobian_block_norms(g, w, cfg, options.step, options.threads);
  return sensitivity_from_blocks(blocks, bfs_distances(g), options.max_hop);
}

// ---------------------------------------------------------------------------

void probe_split(int samples, std::uint64_t seed, std::vector<int>& train, std::vector<int>& test) {
  std::vector<int> order(samples);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int half = samples / 2;
  train.assign(order.begin(), order.begin() + half);
  test.assign(order.begin() + half, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

double r2_score(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted) {
  const double ss_res = (truth - predicted).squaredNorm();
  const double ss_tot = (truth.array() - truth.mean()).square().sum();
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

ProbeResult linear_probe(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                         const ProbeOptions& options) {
  const Eigen::Index samples = features.rows();
  const Eigen::Index d = features.cols();
  if (labels.size() != samples) throw Error(ErrorCode::Dim, "features and labels disagree on sample count");
  if (samples < 4) throw Error(ErrorCode::Dim, "linear probe needs at least 4 samples");
  if (!features.allFinite() || !labels.allFinite()) {
    throw Error(ErrorCode::NonFinite, "probe inputs contain non-finite values");
  }
  if (options.alpha < 0.0 || options.l1_ratio < 0.0 || options.l1_ratio > 1.0) {
    throw Error(ErrorCode::Dim, "alpha must be >= 0 and l1_ratio in [0, 1]");
  }
  if (std::set<double>(labels.data(), labels.data() + samples).size() < 2) {
    throw Error(ErrorCode::Degenerate, "labels take fewer than two distinct values");
  }

  ProbeResult out;
  out.alpha = options.alpha;
  out.l1_ratio = options.l1_ratio;
  out.seed = options.seed;
  probe_split(static_cast<int>(samples), options.seed, out.train_rows, out.test_rows);
  out.n_train = static_cast<int>(out.train_rows.size());
  out.n_test = static_cast<int>(out.test_rows.size());
  const Eigen::Index m = out.n_train;

  Eigen::MatrixXd xs(m, d);
  Eigen::VectorXd y(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    xs.row(r) = features.row(out.train_rows[r]);
    y(r) = labels(out.train_rows[r]);
  }
  const Eigen::RowVectorXd mean = xs.colwise().mean();
  xs.rowwise() -= mean;
  Eigen::RowVectorXd scale = (xs.colwise().squaredNorm() / static_cast<double>(m)).cwiseSqrt();
  for (Eigen::Index c = 0; c < d; ++c) {
    if (scale(c) <= 1e-12 * std::max(1.0, std::abs(mean(c)))) {
      scale(c) = 0.0;
      xs.col(c).setZero();
    } else {
      xs.col(c) /= scale(c);
    }
  }
  const double y_mean = y.mean();
  Eigen::VectorXd residual = y.array() - y_mean;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(d);
  const Eigen::VectorXd curvature = xs.colwise().squaredNorm().transpose() / static_cast<double>(m);
  const double l1 = options.alpha * options.l1_ratio;
  const double l2 = options.alpha * (1.0 - options.l1_ratio);

  bool converged = d == 0;
  int sweep = 0;
  while (!converged && sweep < options.max_sweeps) {
    ++sweep;
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double denom = curvature(j) + l2;
      double updated = 0.0;
      if (denom > 0.0) {
        const double rho = xs.col(j).dot(residual) / static_cast<double>(m) + curvature(j) * coef(j);
        const double shrunk = std::max(std::abs(rho) - l1, 0.0);
        updated = std::copysign(shrunk, rho) / denom;
      }
      const double change = updated - coef(j);
      if (change != 0.0) {
        residual -= change * xs.col(j);
        coef(j) = updated;
      }
      max_change = std::max(max_change, std::abs(change));
    }
    converged = max_change < options.tolerance;
  }
  if (!converged) {
    throw Error(ErrorCode::NoConverge,
                "coordinate descent did not converge in " + std::to_string(options.max_sweeps) + " sweeps");
  }
  out.sweeps = sweep;

  out.coefficients = Eigen::VectorXd::Zero(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    if (scale(c) > 0.0) out.coefficients(c) = coef(c) / scale(c);
  }
  out.intercept = y_mean - mean.dot(out.coefficients);

  Eigen::VectorXd truth(out.n_test);
  Eigen::VectorXd predicted(out.n_test);
  for (int r = 0; r < out.n_test; ++r) {
    truth(r) = labels(out.test_rows[r]);
    predicted(r) = features.row(out.test_rows[r]).dot(out.coefficients) + out.intercept;
  }
  out.r2 = r2_score(truth, predicted);
  return out;
}

}  // namespace gtlens
