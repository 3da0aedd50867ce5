#pragma once

// Bradley-Terry preference probe: P(alpha preferred over beta) is the logistic
// of theta . (h_alpha - h_beta). Fitted by penalized maximum likelihood with
// every pair oriented winner-first, so model-predicted and human-derived labels
// are handled identically.

#include <cstdint>
#include <span>

#include "probekit/types.hpp"

namespace probekit {

struct BTTrainConfig {
  double l2_penalty = 1e-4;
  int max_iterations = 500;
  double tol = 1e-8;  // on the gradient norm
  std::uint64_t seed = 0;
  int layer_id = 0;
};

struct PreferenceTrainMeta {
  std::uint64_t seed = 0;
  double final_nll = 0.0;  // penalized
  int iterations = 0;
  bool converged = false;
  LabelSource label_source = LabelSource::kHuman;
};

struct PreferenceProbe {
  Vector theta;
  int layer_id = 0;
  PreferenceTrainMeta train_meta;
};

double bt_probability(const Vector& theta, const Vector& h_alpha, const Vector& h_beta);

// Penalized negative log-likelihood and gradient over winner-oriented pairs.
struct BTObjective {
  double value = 0.0;
  Vector gradient;
};
BTObjective bt_objective(const Vector& theta, std::span<const PreferencePair> pairs, double l2_penalty);

// Rows are winner-minus-loser differences.
Matrix oriented_differences(std::span<const PreferencePair> pairs);

// Throws kEmptyDataset or kDimensionMismatch. Failing to reach tol within
// max_iterations is reported through train_meta.converged, not thrown.
PreferenceProbe train_bt_probe(std::span<const PreferencePair> pairs, const BTTrainConfig& cfg);

// kFirst iff the probability that w1 is preferred exceeds 0.5 (positive
// logit); exact ties go to kSecond.
Choice predict(const PreferenceProbe& probe, const Vector& w1, const Vector& w2);

}  // namespace probekit
