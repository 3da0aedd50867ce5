#pragma once

// A trained probe of any family, with training dispatch, prediction and the
// `.probe.json` container:
//
//   {
//     "format_version": 1,
//     "kind": "squared_l2" | "cosine" | "dot" | "bradley_terry" | "max_margin"
//             | "concat_logreg" | "weat",
//     "H": ..., "d": ..., "layer_id": ..., "seed": ..., "margin": ...,
//     "meta": { training metadata },
//     "params_hex": base-16 of the float64 little-endian parameter blob
//   }
//
// Parameter blobs: order probes store A (H x d, row-major) then x_o (d);
// Bradley-Terry and max-margin store theta (H); concat_logreg stores theta
// (2H); weat stores the positive vectors then the negative vectors, with the
// labels and set sizes in "meta".

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "probekit/baselines.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/order_probe.hpp"
#include "probekit/preference_probe.hpp"

namespace probekit {

struct WeatModel {
  AttributeWordSets sets;
  int layer_id = 0;
};

struct AnyProbe {
  ProbeFamily family = ProbeFamily::kBradleyTerry;
  // OrderProbe for order families, PreferenceProbe for Bradley-Terry and
  // max-margin.
  std::variant<OrderProbe, PreferenceProbe, ConcatLogRegModel, WeatModel> model;
  std::uint64_t seed = 0;
  double margin = 0.5;

  int layer_id() const;
  int hidden_dim() const;
  int probe_dim() const;  // d for order probes, parameter length otherwise
};

struct TrainSettings {
  std::uint64_t seed = 0;
  int layer_id = 0;
  OrderTrainConfig order;  // seed/layer_id fields are overwritten
  BTTrainConfig bt;        // likewise
  double margin = 0.5;     // order probes and max-margin
};

struct TrainSummary {
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = true;
};

// Trains a probe of the requested family on the slice (ranked instances for
// order families, preference pairs otherwise).
AnyProbe train_probe(ProbeFamily family, const LayerSlice& slice, const TrainSettings& settings);
TrainSummary summarize_training(const AnyProbe& probe);

// Pairwise prediction; throws kInvalidConfig for order families.
PairwisePredictor pairwise_predictor(const AnyProbe& probe);

std::string probe_to_json_text(const AnyProbe& probe);
AnyProbe probe_from_json_text(const std::string& text);
void save_probe(const AnyProbe& probe, const std::filesystem::path& path);
AnyProbe load_probe(const std::filesystem::path& path);

// FNV-1a over the serialized parameters; used to assert probes stay frozen.
std::uint64_t probe_parameter_hash(const AnyProbe& probe);

struct EvalResult {
  std::string metric;  // "spearman" or "accuracy"
  double value = 0.0;
  std::size_t count = 0;
  std::vector<std::string> ids;
  std::vector<double> per_item;  // rho per instance, or 1/0 correctness per pair
  std::optional<WinRateReport> win_report;
};

// Scores a frozen probe on a slice. Order probes: mean Spearman over ranked
// instances. Pairwise probes: accuracy with seeded argument-order flips, plus a
// win-rate report of the labelled winner. Throws kEmptyDataset.
EvalResult evaluate_probe(const AnyProbe& probe, const LayerSlice& slice, std::uint64_t seed,
                          double confidence = 0.95);

// evaluate_probe on another task's data after checking H. Never updates the
// probe. Throws kDimensionMismatch.
EvalResult transfer_evaluate(const AnyProbe& probe, const LayerSlice& target, std::uint64_t seed,
                             double confidence = 0.95);

}  // namespace probekit
