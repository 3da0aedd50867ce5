#include "probekit/preference_probe.hpp"

#include <algorithm>
#include <cmath>

#include "probekit/errors.hpp"
#include "probekit/logistic.hpp"

namespace probekit {
namespace {

void check_pair_dims(const Vector& a, const Vector& b, Eigen::Index expected) {
  if (a.size() != expected || b.size() != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected embeddings of size " + std::to_string(expected));
  }
}

}  // namespace

double bt_probability(const Vector& theta, const Vector& h_alpha, const Vector& h_beta) {
  check_pair_dims(h_alpha, h_beta, theta.size());
  return sigmoid(theta.dot(h_alpha - h_beta));
}

Matrix oriented_differences(std::span<const PreferencePair> pairs) {
  if (pairs.empty()) return Matrix();
  const Eigen::Index h = pairs.front().h_alpha.size();
  Matrix out(static_cast<Eigen::Index>(pairs.size()), h);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    check_pair_dims(pairs[i].h_alpha, pairs[i].h_beta, h);
    out.row(static_cast<Eigen::Index>(i)) = oriented_difference(pairs[i]).transpose();
  }
  return out;
}

BTObjective bt_objective(const Vector& theta, std::span<const PreferencePair> pairs, double l2_penalty) {
  const Matrix diffs = oriented_differences(pairs);
  if (diffs.size() != 0 && diffs.cols() != theta.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "theta size differs from embedding size");
  }
  if (diffs.size() == 0) return {l2_penalty * theta.squaredNorm(), 2.0 * l2_penalty * theta};
  LogisticObjective obj = logistic_objective(diffs, theta, l2_penalty);
  return {obj.value, std::move(obj.gradient)};
}

PreferenceProbe train_bt_probe(std::span<const PreferencePair> pairs, const BTTrainConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "no preference pairs to train on");
  if (cfg.l2_penalty < 0.0) throw Error(ErrorCode::kInvalidConfig, "l2_penalty must be >= 0");
  if (!(cfg.tol > 0.0)) throw Error(ErrorCode::kInvalidConfig, "tol must be > 0");
  if (cfg.max_iterations < 1) throw Error(ErrorCode::kInvalidConfig, "max_iterations must be >= 1");

  const Matrix diffs = oriented_differences(pairs);
  if (!diffs.allFinite()) throw Error(ErrorCode::kInvalidShape, "non-finite embedding entries");

  LogisticFit fit = fit_logistic(diffs, {cfg.l2_penalty, cfg.max_iterations, cfg.tol, cfg.seed});
  if (!fit.theta.allFinite() || !std::isfinite(fit.value)) {
    throw Error(ErrorCode::kDivergedTraining, "Bradley-Terry fit produced non-finite parameters");
  }

  PreferenceProbe probe;
  probe.theta = std::move(fit.theta);
  probe.layer_id = cfg.layer_id;
  const bool any_model = std::any_of(pairs.begin(), pairs.end(), [](const PreferencePair& p) {
    return p.source == LabelSource::kModel;
  });
  probe.train_meta = {cfg.seed, fit.value, fit.iterations, fit.converged,
                      any_model ? LabelSource::kModel : LabelSource::kHuman};
  return probe;
}

Choice predict(const PreferenceProbe& probe, const Vector& w1, const Vector& w2) {
  check_pair_dims(w1, w2, probe.theta.size());
  return probe.theta.dot(w1 - w2) > 0.0 ? Choice::kFirst : Choice::kSecond;
}

}  // namespace probekit
