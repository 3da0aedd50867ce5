#pragma once

#include <string>
#include <string_view>

#include "probekit/types.hpp"

namespace probekit {

enum class DistanceKind { kSquaredL2, kCosine, kDot };

// Norm product below which cosine distance is treated as undefined.
inline constexpr double kCosineEpsilon = 1e-12;

std::string_view distance_kind_name(DistanceKind kind);  // "squared_l2", "cosine", "dot"
DistanceKind parse_distance_kind(std::string_view name);

// SquaredL2: sum (u_i - v_i)^2.  Cosine: 1 - u.v / (|u||v|).  Dot: u.v.
// Dot is used as-is; decoding sorts ascending whatever the kind.
double distance(DistanceKind kind, const Vector& u, const Vector& v);

struct DistanceGradient {
  Vector du;
  Vector dv;
};

DistanceGradient distance_grad(DistanceKind kind, const Vector& u, const Vector& v);

}  // namespace probekit
