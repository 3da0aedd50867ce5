#include "probekit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/beta.hpp>

#include "probekit/errors.hpp"
#include "probekit/probe.hpp"
#include "probekit/random.hpp"

namespace probekit {

double spearman_rho(const Permutation& predicted, const Permutation& gold) {
  if (predicted.size() != gold.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "rank vectors differ in length");
  }
  const std::size_t w = predicted.size();
  if (w < 2) throw Error(ErrorCode::kUndefined, "Spearman's rho needs at least 2 items");
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    const double d = static_cast<double>(predicted[i] - gold[i]);
    sum_sq += d * d;
  }
  const double wd = static_cast<double>(w);
  return 1.0 - 6.0 * sum_sq / (wd * (wd * wd - 1.0));
}

double pairwise_accuracy(std::span<const Choice> predictions, std::span<const Choice> gold) {
  if (predictions.size() != gold.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction and gold counts differ");
  }
  if (predictions.empty()) throw Error(ErrorCode::kUndefined, "accuracy of zero predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predictions[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

Interval clopper_pearson(long k, long n, double confidence) {
  if (n < 1 || k < 0 || k > n) {
    throw Error(ErrorCode::kDomainError,
                "Clopper-Pearson needs 0 <= k <= n, n >= 1 (k=" + std::to_string(k) +
                    ", n=" + std::to_string(n) + ")");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::kDomainError, "confidence must lie in (0, 1)");
  }
  const double tail = (1.0 - confidence) / 2.0;
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  Interval out;
  out.low = k == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<double>(kd, nd - kd + 1.0), tail);
  out.high = k == n ? 1.0
                    : boost::math::quantile(boost::math::beta_distribution<double>(kd + 1.0, nd - kd), 1.0 - tail);
  return out;
}

void randomize_positions(std::vector<GroupPair>& pairs, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  std::bernoulli_distribution coin(0.5);
  for (auto& p : pairs) p.swapped = coin(rng);
}

WinRateReport make_win_rate_report(long wins, long n, double confidence,
                                   std::vector<std::string> group_names) {
  WinRateReport report;
  report.group_names = std::move(group_names);
  report.wins = wins;
  report.n_pairs = n;
  report.confidence = confidence;
  report.win_rate = static_cast<double>(wins) / static_cast<double>(n);
  const Interval ci = clopper_pearson(wins, n, confidence);
  report.ci_low = ci.low;
  report.ci_high = ci.high;
  report.significant = !(ci.low <= 0.5 && 0.5 <= ci.high);
  return report;
}

WinRateReport win_rate(const PairwisePredictor& predictor, std::span<const GroupPair> pairs, Side target,
                       double confidence, std::vector<std::string> group_names) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "win rate over zero pairs");
  long first_group_wins = 0;
  for (const auto& p : pairs) {
    const Choice c = p.swapped ? predictor(p.second_group, p.first_group)
                               : predictor(p.first_group, p.second_group);
    const bool first_group_won = (c == Choice::kFirst) != p.swapped;
    first_group_wins += first_group_won ? 1 : 0;
  }
  const long n = static_cast<long>(pairs.size());
  const long wins = target == Side::kAlpha ? first_group_wins : n - first_group_wins;
  return make_win_rate_report(wins, n, confidence, std::move(group_names));
}

double average_win_rates(const std::vector<std::vector<double>>& rates) {
  if (rates.empty()) throw Error(ErrorCode::kEmptyDataset, "no probes to average over");
  double total = 0.0;
  for (const auto& per_probe : rates) {
    if (per_probe.empty()) throw Error(ErrorCode::kEmptyDataset, "no group pairings to average over");
    total += std::accumulate(per_probe.begin(), per_probe.end(), 0.0) / static_cast<double>(per_probe.size());
  }
  return total / static_cast<double>(rates.size());
}

double averaged_win_rate(std::span<const PairwisePredictor> probes, const std::vector<std::vector<Vector>>& groups,
                         std::size_t target, std::uint64_t seed, double confidence) {
  if (probes.empty()) throw Error(ErrorCode::kEmptyDataset, "no probes to average over");
  if (groups.size() < 2) throw Error(ErrorCode::kDomainError, "need at least two groups");
  if (target >= groups.size()) throw Error(ErrorCode::kDomainError, "target group index out of range");
  std::vector<std::vector<double>> rates(probes.size());
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (j == target) continue;
    std::vector<GroupPair> pairs;
    for (const auto& a : groups[target]) {
      for (const auto& b : groups[j]) pairs.push_back({a, b, false});
    }
    randomize_positions(pairs, derive_seed(seed, j));
    for (std::size_t p = 0; p < probes.size(); ++p) {
      rates[p].push_back(win_rate(probes[p], pairs, Side::kAlpha, confidence).win_rate);
    }
  }
  return average_win_rates(rates);
}

std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::kDomainError, "split fraction must lie in (0, 1)");
  const double raw = static_cast<double>(n) * fraction;
  std::size_t test = static_cast<std::size_t>(std::max(0.0, std::ceil(raw - 0.5)));
  test = std::max<std::size_t>(test, 1);
  if (test >= n) {
    throw Error(ErrorCode::kSplitTooSmall, "cannot split " + std::to_string(n) + " instances with fraction " +
                                               std::to_string(fraction));
  }
  return {n - test, test};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double fraction,
                                                                            std::uint64_t seed) {
  const auto [train_size, test_size] = split_sizes(n, fraction);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(test_size));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(test_size), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

bool is_order_family(ProbeFamily family) {
  return family == ProbeFamily::kOrderSquaredL2 || family == ProbeFamily::kOrderCosine ||
         family == ProbeFamily::kOrderDot;
}

std::string_view probe_family_name(ProbeFamily family) {
  switch (family) {
    case ProbeFamily::kOrderSquaredL2: return "order-l2";
    case ProbeFamily::kOrderCosine: return "order-cos";
    case ProbeFamily::kOrderDot: return "order-dot";
    case ProbeFamily::kBradleyTerry: return "bt";
    case ProbeFamily::kMaxMargin: return "max-margin";
    case ProbeFamily::kConcatLogReg: return "concat-lr";
    case ProbeFamily::kWeat: return "weat";
  }
  return "unknown";
}

ProbeFamily parse_probe_family(std::string_view name) {
  for (ProbeFamily f : {ProbeFamily::kOrderSquaredL2, ProbeFamily::kOrderCosine, ProbeFamily::kOrderDot,
                        ProbeFamily::kBradleyTerry, ProbeFamily::kMaxMargin, ProbeFamily::kConcatLogReg,
                        ProbeFamily::kWeat}) {
    if (probe_family_name(f) == name) return f;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown probe kind '" + std::string(name) + "'");
}

namespace {

LayerSlice subset(const LayerSlice& slice, bool order_family, const std::vector<std::size_t>& idx) {
  LayerSlice out;
  for (std::size_t i : idx) {
    if (order_family) out.ranked.push_back(slice.ranked[i]);
    else out.pairs.push_back(slice.pairs[i]);
  }
  return out;
}

}  // namespace

LayerSweepResult layer_sweep(const ActivationArchive& archive, const SweepConfig& cfg) {
  const auto& layers = archive.manifest().layer_ids;
  if (layers.empty()) throw Error(ErrorCode::kLayerNotFound, "archive has no layers");
  const bool order_family = is_order_family(cfg.family);

  LayerSweepResult result;
  result.metric = order_family ? "spearman" : "accuracy";
  result.middle_layer = middle_layer(archive.manifest());

  TrainSettings settings;
  settings.seed = cfg.seed;
  settings.margin = cfg.margin;
  settings.order.probe_dim = cfg.probe_dim;
  settings.order.learning_rate = cfg.learning_rate;
  settings.order.epochs = cfg.epochs;
  settings.order.batch_size = cfg.batch_size;
  settings.bt.l2_penalty = cfg.l2_penalty;
  settings.bt.max_iterations = cfg.max_iterations;

  for (int layer : layers) {
    const LayerSlice slice = slice_layer(archive, layer, cfg.task_filter);
    const std::size_t n = order_family ? slice.ranked.size() : slice.pairs.size();
    if (n == 0) throw Error(ErrorCode::kEmptyDataset, "no instances for the requested probe family");
    const auto [train_idx, test_idx] = split_indices(n, cfg.test_fraction, cfg.seed);
    settings.layer_id = layer;
    const AnyProbe probe = train_probe(cfg.family, subset(slice, order_family, train_idx), settings);
    const EvalResult eval = evaluate_probe(probe, subset(slice, order_family, test_idx), cfg.seed);
    result.layer_ids.push_back(layer);
    result.values.push_back(eval.value);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.values.size(); ++i) {
    if (result.values[i] > result.values[best]) best = i;
  }
  result.best_layer = result.layer_ids[best];
  return result;
}

}  // namespace probekit
