#include "probekit/logistic.hpp"

#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "probekit/random.hpp"

namespace probekit {
namespace {

constexpr Eigen::Index kNewtonMaxDim = 1024;
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

Vector newton_direction(const Matrix& x, const Vector& theta, const Vector& grad, double l2) {
  const Vector logits = x * theta;
  Vector weights(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double p = sigmoid(logits(i));
    weights(i) = p * (1.0 - p);
  }
  Matrix hessian = x.transpose() * weights.asDiagonal() * x;
  hessian.diagonal().array() += 2.0 * l2;
  Eigen::LDLT<Matrix> ldlt(hessian);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return -grad;
  Vector step = -ldlt.solve(grad);
  if (!step.allFinite() || step.dot(grad) >= 0.0) return -grad;
  return step;
}

}  // namespace

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticObjective logistic_objective(const Matrix& signed_features, const Vector& theta, double l2) {
  const Vector logits = signed_features * theta;
  LogisticObjective out;
  Vector residual(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    out.value += softplus(-logits(i));
    residual(i) = -sigmoid(-logits(i));  // d softplus(-z) / dz
  }
  out.value += l2 * theta.squaredNorm();
  out.gradient = signed_features.transpose() * residual + 2.0 * l2 * theta;
  return out;
}

LogisticFit fit_logistic(const Matrix& x, const LogisticSolverOptions& options) {
  const Eigen::Index dim = x.cols();
  Rng rng(derive_seed(options.seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(dim, 1))));
  LogisticFit fit;
  fit.theta.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) fit.theta(i) = normal(rng);

  LogisticObjective current = logistic_objective(x, fit.theta, options.l2);
  double gd_step = 1.0;
  for (fit.iterations = 0; fit.iterations < options.max_iterations; ++fit.iterations) {
    if (current.gradient.norm() <= options.gradient_tol) {
      fit.converged = true;
      break;
    }
    const bool newton = dim <= kNewtonMaxDim;
    const Vector direction =
        newton ? newton_direction(x, fit.theta, current.gradient, options.l2) : Vector(-current.gradient);
    const double slope = current.gradient.dot(direction);
    double step = newton ? 1.0 : gd_step;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      Vector candidate = fit.theta + step * direction;
      LogisticObjective trial = logistic_objective(x, candidate, options.l2);
      // Near the optimum the decrease drops below double resolution; accept a
      // flat step when it still shrinks the gradient.
      const bool sufficient = trial.value <= current.value + kArmijo * step * slope;
      const bool flat = trial.value <= current.value + 1e-13 * std::abs(current.value) &&
                        trial.gradient.norm() < current.gradient.norm();
      if (std::isfinite(trial.value) && (sufficient || flat)) {
        fit.theta = std::move(candidate);
        current = std::move(trial);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    if (!newton) gd_step = std::min(step * 2.0, 1e6);
  }
  if (!fit.converged && current.gradient.norm() <= options.gradient_tol) fit.converged = true;
  fit.value = current.value;
  return fit;
}

}  // namespace probekit
