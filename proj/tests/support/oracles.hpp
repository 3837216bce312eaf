#pragma once

// Slow reference implementations used to check the fast library code.

#include <cmath>
#include <cstddef>
#include <span>

namespace oracle {

// Kendall tau by enumerating every pair.
inline double kendall_tau_pairs(std::span<const double> x, std::span<const double> y, bool tau_b) {
  const std::size_t m = x.size();
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0) ++ties_x;
      if (dy == 0.0) ++ties_y;
      if (dx == 0.0 || dy == 0.0) continue;
      if ((dx > 0) == (dy > 0)) ++concordant;
      else ++discordant;
    }
  }
  const double n0 = static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
  const double num = static_cast<double>(concordant - discordant);
  if (!tau_b) return num / n0;
  const double denom = std::sqrt((n0 - ties_x) * (n0 - ties_y));
  return denom == 0.0 ? 0.0 : num / denom;
}

}  // namespace oracle
