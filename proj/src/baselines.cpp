#include "probekit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "probekit/errors.hpp"
#include "probekit/geometry.hpp"
#include "probekit/logistic.hpp"
#include "probekit/random.hpp"

namespace probekit {
namespace {

double mean_cosine_distance(const std::vector<LabeledVector>& set, const Vector& w) {
  double total = 0.0;
  for (const auto& item : set) total += distance(DistanceKind::kCosine, w, item.embedding);
  return total / static_cast<double>(set.size());
}

std::string item_label(const PreferencePair& p, Side side) {
  const std::string& label = side == Side::kAlpha ? p.label_alpha : p.label_beta;
  if (!label.empty()) return label;
  return p.id + (side == Side::kAlpha ? ":alpha" : ":beta");
}

}  // namespace

void validate_attribute_sets(const AttributeWordSets& sets) {
  if (sets.positive.empty() || sets.negative.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "attribute word sets must both be non-empty");
  }
  const Eigen::Index h = sets.positive.front().embedding.size();
  std::set<std::string> positive_labels;
  for (const auto& item : sets.positive) {
    if (item.embedding.size() != h) throw Error(ErrorCode::kDimensionMismatch, "inconsistent H in attribute sets");
    positive_labels.insert(item.label);
  }
  for (const auto& item : sets.negative) {
    if (item.embedding.size() != h) throw Error(ErrorCode::kDimensionMismatch, "inconsistent H in attribute sets");
    if (positive_labels.count(item.label) != 0) {
      throw Error(ErrorCode::kInvalidConfig, "label '" + item.label + "' is in both attribute sets");
    }
  }
}

AttributeWordSets attribute_sets_from_pairs(std::span<const PreferencePair> pairs) {
  AttributeWordSets sets;
  std::set<std::string> seen;
  for (const auto& p : pairs) {
    const Side loser = p.winner == Side::kAlpha ? Side::kBeta : Side::kAlpha;
    const Vector& win_vec = p.winner == Side::kAlpha ? p.h_alpha : p.h_beta;
    const Vector& lose_vec = p.winner == Side::kAlpha ? p.h_beta : p.h_alpha;
    if (std::string label = item_label(p, p.winner); seen.insert(label).second) {
      sets.positive.push_back({std::move(label), win_vec});
    }
    if (std::string label = item_label(p, loser); seen.insert(label).second) {
      sets.negative.push_back({std::move(label), lose_vec});
    }
  }
  return sets;
}

double weat_score(const AttributeWordSets& sets, const Vector& w) {
  if (sets.positive.empty() || sets.negative.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "attribute word sets must both be non-empty");
  }
  return mean_cosine_distance(sets.positive, w) - mean_cosine_distance(sets.negative, w);
}

Choice weat_predict(const AttributeWordSets& sets, const Vector& w1, const Vector& w2) {
  return weat_score(sets, w1) < weat_score(sets, w2) ? Choice::kFirst : Choice::kSecond;
}

MaxMarginObjective maxmargin_objective(const Vector& theta, std::span<const PreferencePair> pairs,
                                       double margin, double l2_penalty) {
  MaxMarginObjective out;
  out.value = l2_penalty * theta.squaredNorm();
  out.gradient = 2.0 * l2_penalty * theta;
  for (const auto& p : pairs) {
    const Vector diff = oriented_difference(p);
    if (diff.size() != theta.size()) throw Error(ErrorCode::kDimensionMismatch, "theta size differs from H");
    const double slack = margin - theta.dot(diff);
    if (slack > 0.0) {
      out.value += slack;
      out.gradient -= diff;
    }
  }
  return out;
}

PreferenceProbe train_maxmargin(std::span<const PreferencePair> pairs, const MaxMarginConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "no preference pairs to train on");
  if (cfg.margin < 0.0) throw Error(ErrorCode::kInvalidConfig, "margin must be >= 0");
  if (!(cfg.l2_penalty > 0.0)) throw Error(ErrorCode::kInvalidConfig, "max-margin needs l2_penalty > 0");

  const Matrix x = oriented_differences(pairs);
  const Eigen::Index n = x.rows();
  // Dual of  1/2 |theta|^2 + C sum max(0, c - theta . x_i)  with C = 1 / (2 l2).
  const double upper = 1.0 / (2.0 * cfg.l2_penalty);
  const Vector diag = x.rowwise().squaredNorm();

  Vector theta = Vector::Zero(x.cols());
  Vector alpha = Vector::Zero(n);
  Vector best = theta;
  double best_value = maxmargin_objective(theta, pairs, cfg.margin, cfg.l2_penalty).value;

  Rng rng(derive_seed(cfg.seed, 0));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  int epoch = 0;
  bool converged = false;
  for (; epoch < cfg.max_iterations && !converged; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double max_violation = 0.0;
    for (Eigen::Index i : order) {
      if (diag(i) == 0.0) continue;
      const double g = theta.dot(x.row(i)) - cfg.margin;
      double pg = g;
      if (alpha(i) <= 0.0) pg = std::min(g, 0.0);
      else if (alpha(i) >= upper) pg = std::max(g, 0.0);
      max_violation = std::max(max_violation, std::abs(pg));
      if (pg == 0.0) continue;
      const double updated = std::clamp(alpha(i) - g / diag(i), 0.0, upper);
      theta += (updated - alpha(i)) * x.row(i).transpose();
      alpha(i) = updated;
    }
    const double value = maxmargin_objective(theta, pairs, cfg.margin, cfg.l2_penalty).value;
    if (value < best_value) {
      best_value = value;
      best = theta;
    }
    converged = max_violation <= cfg.tol;
  }

  PreferenceProbe probe;
  probe.theta = std::move(best);
  probe.layer_id = cfg.layer_id;
  probe.train_meta = {cfg.seed, best_value, epoch, converged, pairs.front().source};
  return probe;
}

double concat_probability(const ConcatLogRegModel& model, const Vector& h_first, const Vector& h_second) {
  const Eigen::Index h = h_first.size();
  if (h_second.size() != h || model.theta.size() != 2 * h) {
    throw Error(ErrorCode::kDimensionMismatch, "concatenated embedding size differs from model");
  }
  return sigmoid(model.theta.head(h).dot(h_first) + model.theta.tail(h).dot(h_second));
}

Matrix concat_training_rows(std::span<const PreferencePair> pairs) {
  if (pairs.empty()) return Matrix();
  const Eigen::Index h = pairs.front().h_alpha.size();
  Matrix rows(2 * static_cast<Eigen::Index>(pairs.size()), 2 * h);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.h_alpha.size() != h || p.h_beta.size() != h) {
      throw Error(ErrorCode::kDimensionMismatch, "inconsistent H across pairs");
    }
    const double sign = p.winner == Side::kAlpha ? 1.0 : -1.0;
    const auto r = static_cast<Eigen::Index>(2 * i);
    rows.row(r) << sign * p.h_alpha.transpose(), sign * p.h_beta.transpose();
    rows.row(r + 1) << -sign * p.h_beta.transpose(), -sign * p.h_alpha.transpose();
  }
  return rows;
}

ConcatLogRegModel train_concat_logreg(std::span<const PreferencePair> pairs, const BTTrainConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "no preference pairs to train on");
  const Matrix rows = concat_training_rows(pairs);
  LogisticFit fit = fit_logistic(rows, {cfg.l2_penalty, cfg.max_iterations, cfg.tol, cfg.seed});
  if (!fit.theta.allFinite()) throw Error(ErrorCode::kDivergedTraining, "concat logistic regression diverged");
  ConcatLogRegModel model;
  model.theta = std::move(fit.theta);
  model.layer_id = cfg.layer_id;
  model.train_meta = {cfg.seed, fit.value, fit.iterations, fit.converged, pairs.front().source};
  return model;
}

Choice concat_predict(const ConcatLogRegModel& model, const Vector& w1, const Vector& w2) {
  const Eigen::Index h = w1.size();
  if (w2.size() != h || model.theta.size() != 2 * h) {
    throw Error(ErrorCode::kDimensionMismatch, "concatenated embedding size differs from model");
  }
  return model.theta.head(h).dot(w1) + model.theta.tail(h).dot(w2) > 0.0 ? Choice::kFirst : Choice::kSecond;
}

}  // namespace probekit
