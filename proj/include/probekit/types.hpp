#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace probekit {

// Computation is always double precision; storage is float32.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Ranks are 1-based: ranks[j] is the true rank of item j.
using Permutation = std::vector<int>;

enum class Side { kAlpha, kBeta };
enum class LabelSource { kModel, kHuman };
// Outcome of a pairwise predictor called as predict(w1, w2).
enum class Choice { kFirst, kSecond };

struct RankedInstance {
  std::string id;
  Matrix embeddings;  // W x H, one row per item
  Permutation gold_ranks;
};

struct PreferencePair {
  std::string id;
  Vector h_alpha;
  Vector h_beta;
  Side winner = Side::kAlpha;
  LabelSource source = LabelSource::kHuman;
  std::string label_alpha;
  std::string label_beta;
};

// Embedding difference oriented winner minus loser.
inline Vector oriented_difference(const PreferencePair& pair) {
  return pair.winner == Side::kAlpha ? Vector(pair.h_alpha - pair.h_beta)
                                     : Vector(pair.h_beta - pair.h_alpha);
}

bool is_permutation_of_ranks(const Permutation& ranks);

}  // namespace probekit
