#pragma once

// Named parameter points for phase portraits and escape grids. The
// mutualistic points sit near the saddle-node curves at (alpha, beta) =
// (3.1, 1.3); the mixed-case points at (3.1, -1.3).

#include "hilltop/normal_form.hpp"

#include <array>
#include <optional>
#include <string_view>

namespace hilltop::named_points {

inline constexpr double kAlpha = 3.1;
inline constexpr double kBetaMutualistic = 1.3;
inline constexpr double kBetaMixed = -1.3;

struct NamedPoint {
  std::string_view label;
  Params params;
};

// (a) and (d): no equilibria, just past a fold, ghost exits through the top
// and through the right side respectively. (b): stable node and saddle.
// (c): four equilibria.
inline constexpr std::array<NamedPoint, 4> kMutualistic{{
    {"mutualistic-a", Params{kAlpha, kBetaMutualistic, 6.0, -5.9}},
    {"mutualistic-b", Params{kAlpha, kBetaMutualistic, 2.0, 0.0}},
    {"mutualistic-c", Params{kAlpha, kBetaMutualistic, 6.0, 16.0}},
    {"mutualistic-d", Params{kAlpha, kBetaMutualistic, -4.0, -4.13}},
}};

// (g): between the Hopf point and the fold of periodic orbits at gamma = 1,
// a stable orbit inside an unstable one.
inline constexpr std::array<NamedPoint, 1> kMixed{{
    {"mixed-g", Params{kAlpha, kBetaMixed, 1.0, -0.11}},
}};

inline std::optional<Params> lookup(std::string_view label) {
  for (const auto& p : kMutualistic) {
    if (p.label == label) return p.params;
  }
  for (const auto& p : kMixed) {
    if (p.label == label) return p.params;
  }
  return std::nullopt;
}

}  // namespace hilltop::named_points
