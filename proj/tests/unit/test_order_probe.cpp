#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/order_probe.hpp"
#include "probekit/synthetic.hpp"
#include "test_util.hpp"

using namespace probekit;

namespace {

// Probe whose distances are the first coordinate of each embedding under the
// dot kind: A = e_1 (H x 1), x_o = 1.
OrderProbe first_coordinate_probe(int hidden) {
  OrderProbe p;
  p.projection = Matrix::Zero(hidden, 1);
  p.projection(0, 0) = 1.0;
  p.anchor = Vector::Ones(1);
  p.kind = DistanceKind::kDot;
  return p;
}

RankedInstance instance_with_first_coords(const std::vector<double>& coords, Permutation gold, int hidden = 3) {
  RankedInstance inst;
  inst.id = "i";
  inst.embeddings = Matrix::Zero(static_cast<Eigen::Index>(coords.size()), hidden);
  for (std::size_t j = 0; j < coords.size(); ++j) inst.embeddings(static_cast<Eigen::Index>(j), 0) = coords[j];
  inst.gold_ranks = std::move(gold);
  return inst;
}

}  // namespace

TEST_CASE("pair_hinge examples") {
  CHECK(pair_hinge(0.2, 1.0, 0.5) == 0.0);
  CHECK(pair_hinge(1.0, 0.8, 0.5) == doctest::Approx(0.7));
  CHECK(pair_hinge(3.3, 3.3, 0.0) == 0.0);
}

TEST_CASE("order_loss examples") {
  const OrderProbe p = first_coordinate_probe(3);
  CHECK(order_loss(p, instance_with_first_coords({0.0, 1.0}, {1, 2}), 0.5) == doctest::Approx(0.0));
  CHECK(order_loss(p, instance_with_first_coords({2.0, 2.0, 2.0}, {1, 2, 3}), 0.5) == doctest::Approx(1.5));
  CHECK(order_loss(p, instance_with_first_coords({1.0, 0.0}, {1, 2}), 0.5) == doctest::Approx(1.5));
}

TEST_CASE("ranks_from_distances sorts ascending with index ties") {
  Vector d(3);
  d << 0.9, 0.1, 0.5;
  CHECK(ranks_from_distances(d) == Permutation{3, 1, 2});
  CHECK(ranks_from_distances(Vector::Constant(4, 0.25)) == Permutation{1, 2, 3, 4});
  Vector two(2);
  two << 0.4, 0.3;
  CHECK(ranks_from_distances(two) == Permutation{2, 1});
}

TEST_CASE("order_objective gradient matches finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (DistanceKind kind : {DistanceKind::kSquaredL2, DistanceKind::kCosine, DistanceKind::kDot}) {
    OrderProbe p;
    p.kind = kind;
    p.projection = Matrix::NullaryExpr(6, 3, [&] { return g(rng); });
    p.anchor = Vector::NullaryExpr(3, [&] { return g(rng); });
    std::vector<RankedInstance> batch;
    for (int i = 0; i < 3; ++i) {
      RankedInstance inst;
      inst.embeddings = Matrix::NullaryExpr(4, 6, [&] { return g(rng); });
      inst.gold_ranks = {2, 4, 1, 3};
      batch.push_back(inst);
    }
    const auto obj = order_objective(p, batch, 0.5, 1e-3);
    Vector flat(6 * 3 + 3);
    flat << Eigen::Map<const Vector>(p.projection.data(), 18), p.anchor;
    auto f = [&](const Vector& x) {
      OrderProbe q = p;
      q.projection = Eigen::Map<const Matrix>(x.data(), 6, 3);
      q.anchor = x.tail(3);
      return order_objective(q, batch, 0.5, 1e-3).value;
    };
    Vector analytic(21);
    analytic << Eigen::Map<const Vector>(obj.grad_projection.data(), 18), obj.grad_anchor;
    CHECK(oracle::relative_error(analytic, oracle::fd_gradient(f, flat)) < 1e-4);
  }
}

TEST_CASE("training on planted data decodes the training orderings") {
  PlantedOrderSpec spec;
  spec.hidden_dim = 16;
  spec.items = 5;
  spec.instances = 40;
  spec.seed = 5;
  const auto data = gen_planted_order(spec);
  OrderTrainConfig cfg;
  cfg.probe_dim = 8;
  cfg.epochs = 150;
  const OrderProbe p = train_order_probe(data, cfg, DistanceKind::kDot);
  double total = 0.0;
  for (const auto& inst : data) total += spearman_rho(decode_order(p, inst.embeddings), inst.gold_ranks);
  CHECK(total / data.size() == doctest::Approx(1.0));
}

TEST_CASE("single two-item instance reaches zero loss for every kind") {
  RankedInstance inst;
  inst.id = "one";
  inst.embeddings = Matrix(2, 4);
  inst.embeddings << 1.0, 0.5, -0.3, 2.0, -0.7, 1.1, 0.4, 0.2;
  inst.gold_ranks = {2, 1};
  for (DistanceKind kind : {DistanceKind::kSquaredL2, DistanceKind::kCosine, DistanceKind::kDot}) {
    OrderTrainConfig cfg;
    cfg.probe_dim = 2;
    cfg.epochs = 2000;
    cfg.learning_rate = 1e-2;
    cfg.seed = 1;
    const OrderProbe p = train_order_probe(std::vector<RankedInstance>{inst}, cfg, kind);
    CHECK(order_loss(p, inst, cfg.margin) == doctest::Approx(0.0));
  }
}

TEST_CASE("training is bit-identical for a fixed seed") {
  PlantedOrderSpec spec;
  spec.hidden_dim = 8;
  spec.items = 4;
  spec.instances = 20;
  spec.noise_sigma = 0.3;
  const auto data = gen_planted_order(spec);
  OrderTrainConfig cfg;
  cfg.probe_dim = 4;
  cfg.epochs = 20;
  cfg.seed = 9;
  const auto a = train_order_probe(data, cfg, DistanceKind::kCosine);
  const auto b = train_order_probe(data, cfg, DistanceKind::kCosine);
  CHECK(a.projection == b.projection);
  CHECK(a.anchor == b.anchor);
}

TEST_CASE("training rejects bad inputs") {
  OrderTrainConfig cfg;
  CHECK(thrown_code([&] { train_order_probe(std::vector<RankedInstance>{}, cfg, DistanceKind::kDot); }) ==
        ErrorCode::kEmptyDataset);
  PlantedOrderSpec spec;
  spec.hidden_dim = 4;
  spec.instances = 3;
  const auto data = gen_planted_order(spec);
  cfg.probe_dim = 8;
  CHECK(thrown_code([&] { train_order_probe(data, cfg, DistanceKind::kDot); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("diverging training is reported") {
  PlantedOrderSpec spec;
  spec.hidden_dim = 4;
  spec.instances = 5;
  spec.items = 3;
  auto data = gen_planted_order(spec);
  OrderTrainConfig cfg;
  cfg.probe_dim = 2;
  cfg.epochs = 3;
  cfg.learning_rate = 1e300;
  CHECK(thrown_code([&] { train_order_probe(data, cfg, DistanceKind::kDot); }) == ErrorCode::kDivergedTraining);
  data[0].embeddings(0, 0) = std::numeric_limits<double>::infinity();
  cfg.learning_rate = 1e-3;
  CHECK(thrown_code([&] { train_order_probe(data, cfg, DistanceKind::kDot); }) == ErrorCode::kInvalidShape);
}

TEST_CASE("project_for_viz shapes and identity projection") {
  OrderProbe p;
  p.projection = Matrix::Zero(4, 2);
  p.projection(0, 0) = 1.0;
  p.projection(1, 1) = 1.0;
  p.anchor = Vector::Zero(2);
  Matrix h(3, 4);
  h << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  const auto pts = project_for_viz(p, h);
  CHECK(pts.items.rows() == 3);
  CHECK(pts.items.cols() == 2);
  CHECK(pts.anchor.size() == 2);
  CHECK(pts.items.col(0) == h.col(0));
  CHECK(pts.items.col(1) == h.col(1));
  p.projection = Matrix::Zero(4, 4);
  p.anchor = Vector::Zero(4);
  CHECK(thrown_code([&] { project_for_viz(p, h); }) == ErrorCode::kNotVisualizable);
}
