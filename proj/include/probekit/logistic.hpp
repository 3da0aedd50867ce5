#pragma once

#include <cstdint>

#include "probekit/types.hpp"

namespace probekit {

// log(1 + e^z) without overflow.
double softplus(double z);
// Logistic function, stable for large |z|.
double sigmoid(double z);

// Penalized logistic objective over signed feature rows x_i (each row is a
// sample that should receive a positive logit):
//
//   f(theta) = sum_i softplus(-theta . x_i) + l2 * |theta|^2
struct LogisticObjective {
  double value = 0.0;
  Vector gradient;
};

LogisticObjective logistic_objective(const Matrix& signed_features, const Vector& theta, double l2);

struct LogisticFit {
  Vector theta;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct LogisticSolverOptions {
  double l2 = 1e-4;
  int max_iterations = 500;
  double gradient_tol = 1e-8;
  std::uint64_t seed = 0;
};

// Newton's method with Armijo backtracking (gradient descent with
// backtracking when the dimension is too large for a dense Hessian). The
// starting point is drawn from the seed; for l2 > 0 the optimum is unique.
LogisticFit fit_logistic(const Matrix& signed_features, const LogisticSolverOptions& options);

}  // namespace probekit
