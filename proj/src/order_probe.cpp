#include "probekit/order_probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "probekit/errors.hpp"
#include "probekit/random.hpp"

namespace probekit {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

Matrix prepared_embeddings(const OrderProbe& probe, const Matrix& embeddings) {
  if (embeddings.cols() != probe.hidden_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embeddings have " + std::to_string(embeddings.cols()) + " columns, probe expects " +
                    std::to_string(probe.hidden_dim()));
  }
  if (!probe.normalize_embeddings) return embeddings;
  Matrix out = embeddings;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double n = out.row(r).norm();
    if (!(n > kCosineEpsilon)) throw Error(ErrorCode::kDegenerateVector, "zero embedding row");
    out.row(r) /= n;
  }
  return out;
}

// Coefficient of each d_j in the instance loss; the loss itself is returned.
double hinge_coefficients(const Vector& distances, const Permutation& ranks, double c,
                          Vector& coeffs) {
  const Eigen::Index w = distances.size();
  coeffs.setZero(w);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < w; ++j) {
    for (Eigen::Index k = 0; k < w; ++k) {
      if (ranks[static_cast<std::size_t>(j)] >= ranks[static_cast<std::size_t>(k)]) continue;
      const double h = pair_hinge(distances(j), distances(k), c);
      if (h > 0.0) {
        loss += h;
        coeffs(j) += 1.0;
        coeffs(k) -= 1.0;
      }
    }
  }
  return loss;
}

void validate_instance(const RankedInstance& inst, Eigen::Index hidden_dim) {
  if (inst.embeddings.cols() != hidden_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "instance '" + inst.id + "' has inconsistent H");
  }
  if (static_cast<std::size_t>(inst.embeddings.rows()) != inst.gold_ranks.size() ||
      !is_permutation_of_ranks(inst.gold_ranks)) {
    throw Error(ErrorCode::kInvalidShape, "instance '" + inst.id + "' has invalid gold ranks");
  }
  if (!inst.embeddings.allFinite()) {
    throw Error(ErrorCode::kInvalidShape, "instance '" + inst.id + "' has non-finite entries");
  }
}

void validate_config(const OrderTrainConfig& cfg, int hidden_dim) {
  if (cfg.margin < 0.0) throw Error(ErrorCode::kInvalidConfig, "margin must be >= 0");
  if (cfg.probe_dim < 1) throw Error(ErrorCode::kInvalidConfig, "probe_dim must be >= 1");
  if (cfg.probe_dim > hidden_dim) {
    throw Error(ErrorCode::kInvalidConfig, "probe_dim " + std::to_string(cfg.probe_dim) +
                                               " exceeds hidden dim " + std::to_string(hidden_dim));
  }
  if (!(cfg.learning_rate > 0.0)) throw Error(ErrorCode::kInvalidConfig, "learning_rate must be > 0");
  if (cfg.epochs < 1) throw Error(ErrorCode::kInvalidConfig, "epochs must be >= 1");
  if (cfg.batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  if (cfg.convergence_window < 1) throw Error(ErrorCode::kInvalidConfig, "convergence_window must be >= 1");
  if (cfg.projection_l2 < 0.0) throw Error(ErrorCode::kInvalidConfig, "projection_l2 must be >= 0");
}

struct AdamState {
  Matrix m_a, v_a;
  Vector m_x, v_x;
  long step = 0;

  AdamState(Eigen::Index h, Eigen::Index d)
      : m_a(Matrix::Zero(h, d)), v_a(Matrix::Zero(h, d)), m_x(Vector::Zero(d)), v_x(Vector::Zero(d)) {}

  void apply(OrderProbe& probe, const OrderObjective& grad, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
    m_a = kAdamBeta1 * m_a + (1.0 - kAdamBeta1) * grad.grad_projection;
    v_a = kAdamBeta2 * v_a + (1.0 - kAdamBeta2) * grad.grad_projection.cwiseAbs2();
    m_x = kAdamBeta1 * m_x + (1.0 - kAdamBeta1) * grad.grad_anchor;
    v_x = kAdamBeta2 * v_x + (1.0 - kAdamBeta2) * grad.grad_anchor.cwiseAbs2();
    probe.projection.array() -=
        lr * (m_a.array() / c1) / ((v_a.array() / c2).sqrt() + kAdamEpsilon);
    probe.anchor.array() -= lr * (m_x.array() / c1) / ((v_x.array() / c2).sqrt() + kAdamEpsilon);
  }
};

}  // namespace

double pair_hinge(double d_low, double d_high, double c) {
  return std::max(0.0, d_low - d_high + c);
}

Vector item_distances(const OrderProbe& probe, const Matrix& embeddings) {
  const Matrix projected = prepared_embeddings(probe, embeddings) * probe.projection;
  Vector out(projected.rows());
  for (Eigen::Index j = 0; j < projected.rows(); ++j) {
    out(j) = distance(probe.kind, projected.row(j).transpose(), probe.anchor);
  }
  return out;
}

double order_loss(const OrderProbe& probe, const RankedInstance& instance, double c) {
  validate_instance(instance, probe.hidden_dim());
  Vector coeffs;
  return hinge_coefficients(item_distances(probe, instance.embeddings), instance.gold_ranks, c,
                            coeffs);
}

OrderObjective order_objective(const OrderProbe& probe, std::span<const RankedInstance> batch,
                               double c, double projection_l2) {
  OrderObjective out;
  out.grad_projection = Matrix::Zero(probe.projection.rows(), probe.projection.cols());
  out.grad_anchor = Vector::Zero(probe.anchor.size());
  if (batch.empty()) return out;

  Vector coeffs;
  for (const auto& inst : batch) {
    const Matrix h = prepared_embeddings(probe, inst.embeddings);
    const Matrix projected = h * probe.projection;  // W x d
    Vector dists(projected.rows());
    for (Eigen::Index j = 0; j < projected.rows(); ++j) {
      dists(j) = distance(probe.kind, projected.row(j).transpose(), probe.anchor);
    }
    out.value += hinge_coefficients(dists, inst.gold_ranks, c, coeffs);

    Matrix grad_projected = Matrix::Zero(projected.rows(), projected.cols());
    for (Eigen::Index j = 0; j < projected.rows(); ++j) {
      if (coeffs(j) == 0.0) continue;
      const DistanceGradient g = distance_grad(probe.kind, projected.row(j).transpose(), probe.anchor);
      grad_projected.row(j) = coeffs(j) * g.du.transpose();
      out.grad_anchor += coeffs(j) * g.dv;
    }
    out.grad_projection.noalias() += h.transpose() * grad_projected;
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.value *= scale;
  out.grad_projection *= scale;
  out.grad_anchor *= scale;

  out.value += projection_l2 * probe.projection.squaredNorm();
  out.grad_projection += 2.0 * projection_l2 * probe.projection;
  return out;
}

OrderProbe train_order_probe(std::span<const RankedInstance> data, const OrderTrainConfig& cfg,
                             DistanceKind kind) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "no ranked instances to train on");
  const Eigen::Index hidden_dim = data.front().embeddings.cols();
  for (const auto& inst : data) validate_instance(inst, hidden_dim);
  validate_config(cfg, static_cast<int>(hidden_dim));

  OrderProbe probe;
  probe.kind = kind;
  probe.layer_id = cfg.layer_id;
  probe.margin = cfg.margin;
  probe.normalize_embeddings = cfg.normalize_embeddings;

  Rng init_rng(derive_seed(cfg.seed, 0));
  const double a_bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  std::uniform_real_distribution<double> a_dist(-a_bound, a_bound);
  probe.projection.resize(hidden_dim, cfg.probe_dim);
  for (Eigen::Index c = 0; c < probe.projection.cols(); ++c) {
    for (Eigen::Index r = 0; r < probe.projection.rows(); ++r) probe.projection(r, c) = a_dist(init_rng);
  }
  probe.anchor = Vector::Zero(cfg.probe_dim);
  if (kind == DistanceKind::kCosine) {
    const double x_bound = 1.0 / std::sqrt(static_cast<double>(cfg.probe_dim));
    std::uniform_real_distribution<double> x_dist(-x_bound, x_bound);
    for (Eigen::Index i = 0; i < probe.anchor.size(); ++i) probe.anchor(i) = x_dist(init_rng);
  }

  Rng order_rng(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<RankedInstance> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));
  AdamState adam(hidden_dim, cfg.probe_dim);
  std::vector<double> history;

  int epoch = 0;
  for (; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
      const OrderObjective grad = order_objective(probe, batch, cfg.margin, cfg.projection_l2);
      if (!std::isfinite(grad.value) || !grad.grad_projection.allFinite() || !grad.grad_anchor.allFinite()) {
        throw Error(ErrorCode::kDivergedTraining, "non-finite loss at epoch " + std::to_string(epoch));
      }
      adam.apply(probe, grad, cfg.learning_rate);
    }
    const double epoch_loss = order_objective(probe, data, cfg.margin, cfg.projection_l2).value;
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorCode::kDivergedTraining, "non-finite loss at epoch " + std::to_string(epoch));
    }
    history.push_back(epoch_loss);
    const std::size_t window = static_cast<std::size_t>(cfg.convergence_window);
    if (history.size() > window) {
      const double before = history[history.size() - 1 - window];
      const double change = std::abs(before - epoch_loss) / std::max(std::abs(before), 1e-12);
      if (change < cfg.convergence_tol) {
        ++epoch;
        break;
      }
    }
  }

  double total = 0.0;
  for (const auto& inst : data) total += order_loss(probe, inst, cfg.margin);
  probe.train_meta = {cfg.seed, epoch, total / static_cast<double>(data.size())};
  return probe;
}

Permutation ranks_from_distances(const Vector& distances) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(distances.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return distances(static_cast<Eigen::Index>(a)) < distances(static_cast<Eigen::Index>(b));
  });
  Permutation ranks(idx.size());
  for (std::size_t pos = 0; pos < idx.size(); ++pos) ranks[idx[pos]] = static_cast<int>(pos) + 1;
  return ranks;
}

Permutation decode_order(const OrderProbe& probe, const Matrix& embeddings) {
  return ranks_from_distances(item_distances(probe, embeddings));
}

ProjectedPoints project_for_viz(const OrderProbe& probe, const Matrix& embeddings) {
  if (probe.probe_dim() > 3) {
    throw Error(ErrorCode::kNotVisualizable,
                "probe dimension " + std::to_string(probe.probe_dim()) + " exceeds 3");
  }
  return {prepared_embeddings(probe, embeddings) * probe.projection, probe.anchor};
}

}  // namespace probekit
