#include "probekit/geometry.hpp"

#include <cmath>

#include "probekit/errors.hpp"

namespace probekit {
namespace {

void check_dims(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "distance operands have sizes " +
                                                   std::to_string(u.size()) + " and " +
                                                   std::to_string(v.size()));
  }
}

double checked_norm_product(const Vector& u, const Vector& v) {
  const double product = u.norm() * v.norm();
  if (!(product > kCosineEpsilon)) {
    throw Error(ErrorCode::kDegenerateVector, "cosine distance of a near-zero vector");
  }
  return product;
}

}  // namespace

std::string_view distance_kind_name(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::kSquaredL2: return "squared_l2";
    case DistanceKind::kCosine: return "cosine";
    case DistanceKind::kDot: return "dot";
  }
  return "unknown";
}

DistanceKind parse_distance_kind(std::string_view name) {
  if (name == "squared_l2" || name == "l2") return DistanceKind::kSquaredL2;
  if (name == "cosine" || name == "cos") return DistanceKind::kCosine;
  if (name == "dot") return DistanceKind::kDot;
  throw Error(ErrorCode::kInvalidConfig, "unknown distance kind '" + std::string(name) + "'");
}

double distance(DistanceKind kind, const Vector& u, const Vector& v) {
  check_dims(u, v);
  switch (kind) {
    case DistanceKind::kSquaredL2: return (u - v).squaredNorm();
    case DistanceKind::kCosine: return 1.0 - u.dot(v) / checked_norm_product(u, v);
    case DistanceKind::kDot: return u.dot(v);
  }
  return 0.0;
}

DistanceGradient distance_grad(DistanceKind kind, const Vector& u, const Vector& v) {
  check_dims(u, v);
  switch (kind) {
    case DistanceKind::kSquaredL2: {
      Vector diff = 2.0 * (u - v);
      return {diff, -diff};
    }
    case DistanceKind::kCosine: {
      // d/du (u.v / |u||v|) = v/(|u||v|) - (u.v) u / (|u|^3 |v|)
      const double nu = u.norm();
      const double nv = v.norm();
      const double product = checked_norm_product(u, v);
      const double similarity = u.dot(v) / product;
      Vector du = -(v / product - similarity * u / (nu * nu));
      Vector dv = -(u / product - similarity * v / (nv * nv));
      return {std::move(du), std::move(dv)};
    }
    case DistanceKind::kDot: return {v, u};
  }
  return {};
}

}  // namespace probekit
