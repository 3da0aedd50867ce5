#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <string>
#include <utility>
#include <vector>

#include "probekit/activation_store.hpp"
#include "probekit/types.hpp"

namespace probekit {

// 1 - 6 sum d^2 / (W (W^2 - 1)) for tie-free rank vectors. Throws kUndefined
// for W < 2 and kDimensionMismatch for unequal lengths.
double spearman_rho(const Permutation& predicted, const Permutation& gold);

double pairwise_accuracy(std::span<const Choice> predictions, std::span<const Choice> gold);

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

// Exact two-sided binomial interval. Throws kDomainError unless 0 <= k <= n,
// n >= 1 and 0 < confidence < 1.
Interval clopper_pearson(long k, long n, double confidence = 0.95);

// Any pairwise predictor, called as predict(w1, w2).
using PairwisePredictor = std::function<Choice(const Vector&, const Vector&)>;

// One test pair drawn from two groups. When swapped is set, the predictor is
// called with the second group's word first.
struct GroupPair {
  Vector first_group;
  Vector second_group;
  bool swapped = false;
};

// Seeded coin flip of argument order for every pair.
void randomize_positions(std::vector<GroupPair>& pairs, std::uint64_t seed);

struct WinRateReport {
  std::vector<std::string> group_names;  // {target, other}
  double win_rate = 0.0;
  long wins = 0;
  long n_pairs = 0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double confidence = 0.95;
  bool significant = false;  // 0.5 outside [ci_low, ci_high]
};

WinRateReport make_win_rate_report(long wins, long n, double confidence,
                                   std::vector<std::string> group_names = {});

// Fraction of pairs where the target group's word is predicted preferred.
// Throws kEmptyDataset.
WinRateReport win_rate(const PairwisePredictor& predictor, std::span<const GroupPair> pairs,
                       Side target, double confidence = 0.95,
                       std::vector<std::string> group_names = {});

// rates[probe][j] for every j != target: mean over probes of the mean over
// other groups.
double average_win_rates(const std::vector<std::vector<double>>& rates);

// Double average of win rates of group `target` against every other group,
// over every probe. Pairs are the full cross product of the two groups with
// seeded position flips.
double averaged_win_rate(std::span<const PairwisePredictor> probes,
                         const std::vector<std::vector<Vector>>& groups, std::size_t target,
                         std::uint64_t seed, double confidence = 0.95);

// Test size is round-half-down(n * fraction), at least 1; train must be
// non-empty. Throws kSplitTooSmall or kDomainError.
std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double fraction);  // {train, test}

// Seeded split of indices 0..n-1; each side is returned in ascending order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double fraction,
                                                                            std::uint64_t seed);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> train_test_split(std::span<const T> items, double fraction,
                                                           std::uint64_t seed) {
  auto [train_idx, test_idx] = split_indices(items.size(), fraction, seed);
  std::pair<std::vector<T>, std::vector<T>> out;
  out.first.reserve(train_idx.size());
  out.second.reserve(test_idx.size());
  for (std::size_t i : train_idx) out.first.push_back(items[i]);
  for (std::size_t i : test_idx) out.second.push_back(items[i]);
  return out;
}

enum class ProbeFamily { kOrderSquaredL2, kOrderCosine, kOrderDot, kBradleyTerry, kMaxMargin, kConcatLogReg, kWeat };

bool is_order_family(ProbeFamily family);
std::string_view probe_family_name(ProbeFamily family);
ProbeFamily parse_probe_family(std::string_view name);

struct SweepConfig {
  ProbeFamily family = ProbeFamily::kOrderDot;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::optional<std::string> task_filter;
  // Used by order families.
  int probe_dim = 64;
  double margin = 0.5;
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  // Used by pairwise families.
  double l2_penalty = 1e-4;
  int max_iterations = 500;
};

struct LayerSweepResult {
  std::string metric;  // "spearman" or "accuracy"
  std::vector<int> layer_ids;
  std::vector<double> values;
  int best_layer = 0;    // argmax, ties to the lower layer
  int middle_layer = 0;  // layer_ids[floor(L / 2)]
};

// One probe per layer with the same seed, scored on the held-out split.
LayerSweepResult layer_sweep(const ActivationArchive& archive, const SweepConfig& cfg);

}  // namespace probekit
