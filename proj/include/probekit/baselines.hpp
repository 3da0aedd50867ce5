#pragma once

// Comparison methods for preference prediction: WEAT-style association, a
// max-margin pairwise classifier and logistic regression on concatenated
// embeddings.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "probekit/preference_probe.hpp"
#include "probekit/types.hpp"

namespace probekit {

struct LabeledVector {
  std::string label;
  Vector embedding;
};

struct AttributeWordSets {
  std::vector<LabeledVector> positive;  // W_alpha
  std::vector<LabeledVector> negative;  // W_beta
};

// Throws kEmptyDataset, kDimensionMismatch or kInvalidConfig (shared labels).
void validate_attribute_sets(const AttributeWordSets& sets);

// Winners go to the positive set and losers to the negative set. Items are
// keyed by label (pair id plus side when unlabeled); a label keeps the set of
// its first occurrence.
AttributeWordSets attribute_sets_from_pairs(std::span<const PreferencePair> pairs);

// Mean cosine distance to the positive set minus mean cosine distance to the
// negative set. Smaller means more positively associated.
double weat_score(const AttributeWordSets& sets, const Vector& w);

// kFirst iff weat_score(w1) < weat_score(w2); ties go to kSecond.
Choice weat_predict(const AttributeWordSets& sets, const Vector& w1, const Vector& w2);

struct MaxMarginConfig {
  double margin = 0.5;
  double l2_penalty = 1e-4;
  int max_iterations = 500;  // epochs of dual coordinate descent
  double tol = 1e-8;
  std::uint64_t seed = 0;
  int layer_id = 0;
};

// sum_i max(0, c - theta . (h_win - h_lose)) + l2 * |theta|^2, with subgradient.
struct MaxMarginObjective {
  double value = 0.0;
  Vector gradient;
};
MaxMarginObjective maxmargin_objective(const Vector& theta, std::span<const PreferencePair> pairs,
                                       double margin, double l2_penalty);

// Minimizes the objective above (equivalent to maximizing the clipped margin
// objective) by dual coordinate descent. Returns the best primal iterate,
// never worse than theta = 0. Prediction uses the PreferenceProbe rule.
PreferenceProbe train_maxmargin(std::span<const PreferencePair> pairs, const MaxMarginConfig& cfg);

// Logistic regression on h_first (+) h_second, theta in R^{2H}:
//   P(first preferred) = e^{theta . h_cat} / (e^{theta . h_cat} + 1)
struct ConcatLogRegModel {
  Vector theta;  // 2H
  int layer_id = 0;
  PreferenceTrainMeta train_meta;
};

double concat_probability(const ConcatLogRegModel& model, const Vector& h_first, const Vector& h_second);

// Signed rows (2y - 1) * (h_first (+) h_second) of the position-balanced
// training set: each pair once as stored and once swapped with its label
// flipped.
Matrix concat_training_rows(std::span<const PreferencePair> pairs);

ConcatLogRegModel train_concat_logreg(std::span<const PreferencePair> pairs, const BTTrainConfig& cfg);

Choice concat_predict(const ConcatLogRegModel& model, const Vector& w1, const Vector& w2);

}  // namespace probekit
