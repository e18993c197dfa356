/*
 * Copyright 2026 The ObesEye Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef OBESEYE_LINEAR_HPP_
#define OBESEYE_LINEAR_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "obeseye/common.hpp"

namespace obeseye {

struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
  bool ridge_fallback = false;  // design was rank deficient

  double predict(std::span<const double> x) const {
    check_dimension(weights.size(), x.size());
    double acc = intercept;
    for (std::size_t i = 0; i < x.size(); ++i) acc += weights[i] * x[i];
    return acc;
  }
  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

inline double predict_linear(const LinearModel& model, std::span<const double> x) {
  return model.predict(x);
}

struct OlsOptions {
  bool allow_ridge_fallback = true;
  double ridge_penalty = 1e-8;
};

namespace internal {

struct Centered {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd x_mean;
  double y_mean = 0.0;
};

inline Centered center(const Matrix& features, std::span<const double> targets) {
  const auto n = static_cast<Eigen::Index>(features.rows());
  const auto d = static_cast<Eigen::Index>(features.cols());
  Centered c;
  c.x.resize(n, d);
  c.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) c.x(i, j) = features(i, j);
    c.y(i) = targets[i];
  }
  c.x_mean = c.x.colwise().mean();
  c.y_mean = c.y.mean();
  c.x.rowwise() -= c.x_mean.transpose();
  c.y.array() -= c.y_mean;
  return c;
}

}  // namespace internal

// Least squares with an unpenalized intercept, solved by column-pivoted QR on
// the centred design. A rank-deficient design is refit as ridge regression
// with `ridge_penalty` unless the fallback is disabled.
inline LinearModel fit_ols(const Matrix& features, std::span<const double> targets,
                           const OlsOptions& options = {}) {
  if (features.rows() < 2) throw ValidationError("features", "OLS needs at least 2 rows");
  check_dimension(features.rows(), targets.size());
  const auto c = internal::center(features, targets);
  const auto d = c.x.cols();

  Eigen::VectorXd w;
  bool ridge = false;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c.x);
  if (qr.rank() == d) {
    w = qr.solve(c.y);
  } else if (options.allow_ridge_fallback) {
    Eigen::MatrixXd augmented(c.x.rows() + d, d);
    augmented << c.x, std::sqrt(options.ridge_penalty) * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(c.x.rows() + d);
    rhs.head(c.x.rows()) = c.y;
    w = augmented.householderQr().solve(rhs);
    ridge = true;
  } else {
    std::vector<std::size_t> offending;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < d; ++k) offending.push_back(static_cast<std::size_t>(perm(k)));
    std::sort(offending.begin(), offending.end());
    std::string cols;
    for (auto col : offending) cols += (cols.empty() ? "" : ", ") + std::to_string(col);
    throw SingularityError("rank-deficient design; dependent columns: " + cols, offending);
  }

  LinearModel model;
  model.weights.assign(w.data(), w.data() + d);
  model.intercept = c.y_mean - c.x_mean.dot(w);
  model.ridge_fallback = ridge;
  return model;
}

// ---------------------------------------------------------------------------
// Linear epsilon-SVR:
//   min 0.5 |w|^2 + C * sum_i max(0, |y_i - w.x_i - b| - epsilon)
// solved in the dual by two-coordinate descent (SMO with second-order working
// set selection) over alpha, alpha* in [0, C] with sum(alpha - alpha*) = 0.

struct SvrOptions {
  double c = 2.0;
  double epsilon = 0.1;
  std::size_t max_iterations = 10000;
  double tolerance = 1e-6;  // stop when gap < tolerance * (1 + |primal|)
};

struct SvrModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double c = 2.0;
  double epsilon = 0.1;
  std::vector<double> dual_coefficients;  // alpha_i - alpha*_i, in [-C, C]

  double predict(std::span<const double> x) const {
    check_dimension(weights.size(), x.size());
    double acc = intercept;
    for (std::size_t i = 0; i < x.size(); ++i) acc += weights[i] * x[i];
    return acc;
  }
  friend bool operator==(const SvrModel&, const SvrModel&) = default;
};

struct SvrDiagnostics {
  std::size_t iterations = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double duality_gap = 0.0;
  std::vector<double> solver_objective;  // SMO objective after each iteration
};

// Primal objective for fixed w with the intercept minimised exactly. The loss
// in b is convex piecewise linear with slope -n + (#breakpoints below b), so
// the optimal b set is [bp_(n), bp_(n+1)] over the 2n sorted breakpoints.
struct PrimalAtBestIntercept {
  double objective = 0.0;
  double intercept = 0.0;
};

inline PrimalAtBestIntercept svr_primal(std::span<const double> residuals_without_bias,
                                        double weight_norm_sq, double c, double epsilon) {
  const std::size_t n = residuals_without_bias.size();
  std::vector<double> bp;
  bp.reserve(2 * n);
  for (double r : residuals_without_bias) {
    bp.push_back(r - epsilon);
    bp.push_back(r + epsilon);
  }
  std::nth_element(bp.begin(), bp.begin() + static_cast<std::ptrdiff_t>(n - 1), bp.end());
  const double lo = bp[n - 1];
  const double hi = *std::min_element(bp.begin() + static_cast<std::ptrdiff_t>(n), bp.end());
  const double b = 0.5 * (lo + hi);
  double loss = 0.0;
  for (double r : residuals_without_bias) loss += std::max(0.0, std::abs(r - b) - epsilon);
  return {0.5 * weight_norm_sq + c * loss, b};
}

inline SvrModel fit_svr_linear(const Matrix& features, std::span<const double> targets,
                               const SvrOptions& options = {}, SvrDiagnostics* diagnostics = nullptr) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n < 2) throw ValidationError("features", "SVR needs at least 2 rows");
  check_dimension(n, targets.size());
  if (!(options.c > 0.0)) throw ValidationError("C", "must be > 0");
  if (!(options.epsilon >= 0.0)) throw ValidationError("epsilon", "must be >= 0");
  const double c = options.c;
  const double eps = options.epsilon;

  std::vector<double> kernel(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += features(i, k) * features(j, k);
      kernel[i * n + j] = kernel[j * n + i] = dot;
    }
  }
  auto K = [&](std::size_t i, std::size_t j) { return kernel[i * n + j]; };

  // Variable t < n is alpha_t (sign +1); t >= n is alpha*_{t-n} (sign -1).
  const std::size_t m = 2 * n;
  std::vector<double> z(m, 0.0);
  std::vector<double> beta(n, 0.0);
  std::vector<double> f(n, 0.0);  // w . x_i
  auto sign = [&](std::size_t t) { return t < n ? 1.0 : -1.0; };
  auto row = [&](std::size_t t) { return t < n ? t : t - n; };
  auto linear_term = [&](std::size_t t) { return t < n ? eps - targets[t] : eps + targets[t - n]; };
  auto gradient = [&](std::size_t t) { return sign(t) * f[row(t)] + linear_term(t); };
  auto is_up = [&](std::size_t t) { return t < n ? z[t] < c : z[t] > 0.0; };
  auto is_low = [&](std::size_t t) { return t < n ? z[t] > 0.0 : z[t] < c; };

  std::vector<double> residual(n);
  auto evaluate = [&](SvrDiagnostics& out) {
    double wnorm = 0.0, beta_abs = 0.0, y_beta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      wnorm += beta[i] * f[i];
      beta_abs += std::abs(beta[i]);
      y_beta += targets[i] * beta[i];
      residual[i] = targets[i] - f[i];
    }
    wnorm = std::max(0.0, wnorm);
    const auto primal = svr_primal(residual, wnorm, c, eps);
    out.primal_objective = primal.objective;
    out.dual_objective = -0.5 * wnorm - eps * beta_abs + y_beta;
    out.duality_gap = std::max(0.0, out.primal_objective - out.dual_objective);
    return primal.intercept;
  };
  auto smo_objective = [&] {
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += 0.5 * beta[i] * f[i];
    for (std::size_t t = 0; t < m; ++t) obj += linear_term(t) * z[t];
    return obj;
  };

  auto move_row = [&](std::size_t r, double new_beta) {
    const double delta = new_beta - beta[r];
    beta[r] = new_beta;
    z[r] = std::max(new_beta, 0.0);
    z[r + n] = std::max(-new_beta, 0.0);
    if (delta != 0.0) {
      for (std::size_t k = 0; k < n; ++k) f[k] += delta * K(r, k);
    }
  };

  // Active-set step. With every bounded or zero coefficient held fixed and
  // the signs of the rest frozen, the SMO objective is a quadratic on the
  // face {sum(beta) = 0}. Take its Newton direction, or, when the face is
  // unbounded below, the zero-curvature descent ray; then an exact line
  // search clipped to the box. The objective never increases.
  enum class Step { none, clipped, full };
  auto polish = [&]() -> Step {
    for (std::size_t r = 0; r < n; ++r) {
      if (z[r] > 0.0 && z[r + n] > 0.0) move_row(r, beta[r]);  // drop alpha/alpha* overlap
    }
    std::vector<std::size_t> free;
    for (std::size_t r = 0; r < n; ++r) {
      if (beta[r] != 0.0 && std::abs(beta[r]) < c) free.push_back(r);
    }
    if (free.size() < 2) return Step::none;
    const auto p = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd system(p + 1, p + 1);
    Eigen::VectorXd rhs(p + 1);
    for (Eigen::Index a = 0; a < p; ++a) {
      const std::size_t i = free[static_cast<std::size_t>(a)];
      for (Eigen::Index q = 0; q < p; ++q) system(a, q) = K(i, free[static_cast<std::size_t>(q)]);
      system(a, p) = 1.0;
      system(p, a) = 1.0;
      rhs(a) = -(f[i] - targets[i] + eps * (beta[i] > 0.0 ? 1.0 : -1.0));
    }
    system(p, p) = 0.0;
    rhs(p) = 0.0;
    const Eigen::VectorXd newton = system.completeOrthogonalDecomposition().solve(rhs);
    const Eigen::VectorXd leftover = rhs - system * newton;  // lies in the null space
    const bool unbounded = leftover.norm() > 1e-9 * (1.0 + rhs.norm());
    Eigen::VectorXd step = (unbounded ? leftover : newton).head(p);
    step.array() -= step.mean();  // stay on sum(beta) = 0 despite rounding

    double slope = 0.0, curvature = 0.0;
    for (Eigen::Index a = 0; a < p; ++a) {
      slope -= step(a) * rhs(a);
      for (Eigen::Index q = 0; q < p; ++q) curvature += step(a) * system(a, q) * step(q);
    }
    if (!(slope < 0.0)) return Step::none;
    double t = curvature > 0.0 ? -slope / curvature : std::numeric_limits<double>::infinity();
    std::size_t limiting = free.size();
    for (std::size_t a = 0; a < free.size(); ++a) {
      const double b = beta[free[a]];
      const double s = step(static_cast<Eigen::Index>(a));
      // beta keeps its sign and stays within [-C, C]
      double room = std::numeric_limits<double>::infinity();
      if (b > 0.0) {
        if (s > 0.0) room = (c - b) / s;
        if (s < 0.0) room = -b / s;
      } else {
        if (s < 0.0) room = (-c - b) / s;
        if (s > 0.0) room = -b / s;
      }
      if (room < t) {
        t = room;
        limiting = a;
      }
    }
    if (!(t > 0.0) || !std::isfinite(t)) return Step::none;
    for (std::size_t a = 0; a < free.size(); ++a) {
      const double b = beta[free[a]];
      double nb = b + t * step(static_cast<Eigen::Index>(a));
      if (a == limiting) nb = std::abs(nb) < 0.5 * c ? 0.0 : std::copysign(c, b);
      if (b > 0.0) nb = std::clamp(nb, 0.0, c);
      if (b < 0.0) nb = std::clamp(nb, -c, 0.0);
      move_row(free[a], nb);
    }
    return limiting < free.size() ? Step::clipped : Step::full;
  };

  SvrDiagnostics local;
  SvrDiagnostics& diag = diagnostics ? *diagnostics : local;
  diag = {};
  constexpr double kTau = 1e-12;
  bool try_polish = false;
  bool converged = false;
  double intercept = 0.0;
  std::size_t iter = 0;
  for (;; ++iter) {
    intercept = evaluate(diag);
    if (diag.duality_gap < options.tolerance * (1.0 + std::abs(diag.primal_objective))) {
      converged = true;
      break;
    }
    if (iter == options.max_iterations) break;
    if (try_polish) {
      const Step outcome = polish();
      try_polish = outcome == Step::clipped;
      if (outcome != Step::none) {
        diag.solver_objective.push_back(smo_objective());
        continue;
      }
    }

    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = m;
    for (std::size_t t = 0; t < m; ++t) {
      if (is_up(t) && -sign(t) * gradient(t) > gmax) {
        gmax = -sign(t) * gradient(t);
        i = t;
      }
    }
    if (i == m) {
      converged = true;  // no feasible ascent direction: KKT holds exactly
      break;
    }
    std::size_t j = m;
    double best = std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < m; ++t) {
      if (!is_low(t)) continue;
      const double v = -sign(t) * gradient(t);
      gmin = std::min(gmin, v);
      const double b = gmax - v;
      if (b > 0.0) {
        double a = K(row(i), row(i)) + K(row(t), row(t)) - 2.0 * K(row(i), row(t));
        if (a <= 0.0) a = kTau;
        if (-(b * b) / a < best) {
          best = -(b * b) / a;
          j = t;
        }
      }
    }
    if (j == m || gmax - gmin <= 0.0) {
      converged = true;
      break;
    }

    const double gi = gradient(i), gj = gradient(j);
    const double old_i = z[i], old_j = z[j];
    double quad = K(row(i), row(i)) + K(row(j), row(j)) - 2.0 * K(row(i), row(j));
    if (quad <= 0.0) quad = kTau;
    double& ai = z[i];
    double& aj = z[j];
    if (sign(i) != sign(j)) {
      const double delta = (-gi - gj) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else {
        if (ai < 0) { ai = 0; aj = -diff; }
      }
      if (diff > 0) {
        if (ai > c) { ai = c; aj = c - diff; }
      } else {
        if (aj > c) { aj = c; ai = c + diff; }
      }
    } else {
      const double delta = (gi - gj) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c) {
        if (ai > c) { ai = c; aj = sum - c; }
      } else {
        if (aj < 0) { aj = 0; ai = sum; }
      }
      if (sum > c) {
        if (aj > c) { aj = c; ai = sum - c; }
      } else {
        if (ai < 0) { ai = 0; aj = sum; }
      }
    }

    for (const auto& [t, old] : {std::pair{i, old_i}, std::pair{j, old_j}}) {
      const double delta_beta = sign(t) * (z[t] - old);
      if (delta_beta == 0.0) continue;
      const std::size_t r = row(t);
      beta[r] += delta_beta;
      for (std::size_t k = 0; k < n; ++k) f[k] += delta_beta * K(r, k);
    }
    diag.solver_objective.push_back(smo_objective());
    try_polish = true;
  }
  diag.iterations = iter;
  if (!converged) {
    throw ConvergenceError("SVR did not converge in " + std::to_string(iter) + " iterations",
                           diag.duality_gap);
  }

  SvrModel model;
  model.c = c;
  model.epsilon = eps;
  model.intercept = intercept;
  model.weights.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) model.weights[k] += beta[i] * features(i, k);
  }
  model.dual_coefficients = beta;
  return model;
}

}  // namespace obeseye

#endif  // OBESEYE_LINEAR_HPP_
