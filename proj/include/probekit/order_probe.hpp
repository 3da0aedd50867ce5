#pragma once

// Structural order probe. Each item embedding h (length H) is projected to
// p = A^T h (length d) and scored by its distance to a learned anchor x_o in
// the projected space:
//
//   d_j = delta(A^T h_j, x_o)
//
// Training minimizes the pairwise max-margin loss over every item pair of an
// instance where item j truly ranks ahead of item k:
//
//   sum max(0, d_j - d_k + c)
//
// so items that rank later sit farther from the anchor. Decoding sorts items
// by ascending distance.

#include <cstdint>
#include <span>
#include <vector>

#include "probekit/geometry.hpp"
#include "probekit/types.hpp"

namespace probekit {

struct OrderTrainMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_loss = 0.0;
};

struct OrderProbe {
  Matrix projection;  // H x d
  Vector anchor;      // d
  DistanceKind kind = DistanceKind::kSquaredL2;
  int layer_id = 0;
  double margin = 0.5;
  bool normalize_embeddings = false;
  OrderTrainMeta train_meta;

  int hidden_dim() const { return static_cast<int>(projection.rows()); }
  int probe_dim() const { return static_cast<int>(projection.cols()); }
};

struct OrderTrainConfig {
  double margin = 0.5;
  int probe_dim = 64;
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
  // Stop when the relative change of the epoch loss over the last
  // convergence_window epochs falls below this.
  double convergence_tol = 1e-6;
  int convergence_window = 5;
  // Ridge on A; keeps the dot kind from scaling A without bound.
  double projection_l2 = 1e-4;
  // Scale every item embedding to unit norm before probing.
  bool normalize_embeddings = false;
  int layer_id = 0;
};

// max(0, d_low - d_high + c) where d_low belongs to the item with the smaller
// true rank.
double pair_hinge(double d_low, double d_high, double c);

// Per-item distances d_j of a W x H embedding matrix.
Vector item_distances(const OrderProbe& probe, const Matrix& embeddings);

// Unpenalized pairwise max-margin loss of one instance.
double order_loss(const OrderProbe& probe, const RankedInstance& instance, double c);

struct OrderObjective {
  double value = 0.0;
  Matrix grad_projection;
  Vector grad_anchor;
};

// Mean instance loss over the batch plus projection_l2 * |A|^2, with its
// (sub)gradient. Hinges at exactly zero contribute subgradient 0.
OrderObjective order_objective(const OrderProbe& probe, std::span<const RankedInstance> batch,
                               double c, double projection_l2);

// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8). Deterministic given
// (data, cfg, kind). Throws kEmptyDataset, kInvalidConfig, kDivergedTraining,
// kDimensionMismatch.
OrderProbe train_order_probe(std::span<const RankedInstance> data, const OrderTrainConfig& cfg,
                             DistanceKind kind);

// Ranks by ascending distance, ties to the lower item index.
Permutation ranks_from_distances(const Vector& distances);
Permutation decode_order(const OrderProbe& probe, const Matrix& embeddings);

struct ProjectedPoints {
  Matrix items;   // W x d
  Vector anchor;  // d
};

// Requires d <= 3; throws kNotVisualizable otherwise.
ProjectedPoints project_for_viz(const OrderProbe& probe, const Matrix& embeddings);

}  // namespace probekit
