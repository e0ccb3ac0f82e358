#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

namespace prevalence {

enum class Variant { ipw, alt };

inline std::string to_string(Variant v) { return v == Variant::ipw ? "ipw" : "alt"; }

/// Weight u_i for a unit with exposure w and propensity p1 = P(W_i = 1 | X_i).
///   ipw: w / p1 - (1 - w) / (1 - p1)
///   alt: w * min(p0 / p1, 1) - (1 - w) * min(p1 / p0, 1)
inline double unit_weight(Variant v, double p1, std::uint8_t w) {
  const double p0 = 1.0 - p1;
  if (v == Variant::ipw) return w ? 1.0 / p1 : -1.0 / p0;
  return w ? std::min(p0 / p1, 1.0) : -std::min(p1 / p0, 1.0);
}

}  // namespace prevalence
