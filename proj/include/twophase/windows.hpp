#ifndef TWOPHASE_WINDOWS_HPP_
#define TWOPHASE_WINDOWS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "twophase/error.hpp"
#include "twophase/series.hpp"

namespace twophase {

struct WindowEntry {
  std::size_t start = 0;
  double z = 0.0;  // sum of the window's signed increments, y(t+scale) - y(t)
  double r = 0.0;  // mean absolute deviation of the window's increments
  bool valid = true;
};

struct WindowStats {
  std::size_t scale = 0;
  std::size_t stride = 0;
  std::vector<WindowEntry> entries;

  std::size_t valid_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.valid; }));
  }
};

// Windows of `scale` consecutive increments starting at 0, stride, 2*stride, ...
// A window touching an excluded increment is kept (its z and r are still
// computed) but marked invalid.
inline WindowStats window_stats(const IncrementSeries& incs, std::size_t scale,
                                std::size_t stride) {
  if (scale < 2) throw InputError("scale must be >= 2, got " + std::to_string(scale));
  if (stride < 1) throw InputError("stride must be >= 1");
  if (incs.size() < scale)
    throw InputError("scale " + std::to_string(scale) + " exceeds series length " +
                     std::to_string(incs.size()));
  const auto& inc = incs.signed_values;

  // Prefix count of excluded increments for O(1) validity checks.
  std::vector<std::size_t> excluded_before(inc.size() + 1, 0);
  for (std::size_t k = 0; k < inc.size(); ++k)
    excluded_before[k + 1] = excluded_before[k] + (incs.excluded(k) ? 1 : 0);

  WindowStats out{scale, stride, {}};
  out.entries.reserve((inc.size() - scale) / stride + 1);
  const double inv = 1.0 / static_cast<double>(scale);
  for (std::size_t start = 0; start + scale <= inc.size(); start += stride) {
    double sum = 0.0;
    for (std::size_t k = start; k < start + scale; ++k) sum += inc[k];
    const double mean = sum * inv;
    double dev = 0.0;
    for (std::size_t k = start; k < start + scale; ++k) dev += std::abs(inc[k] - mean);
    const bool valid = excluded_before[start + scale] == excluded_before[start];
    out.entries.push_back({start, sum, dev * inv, valid});
  }
  return out;
}

// `count` integer scales evenly spaced over [min, max], rounded and
// deduplicated.
inline std::vector<std::size_t> scale_grid(std::size_t min, std::size_t max, std::size_t count) {
  if (min < 2 || min > max)
    throw InputError("scale grid needs 2 <= min <= max, got " + std::to_string(min) + ":" +
                     std::to_string(max));
  if (count == 0) throw InputError("empty scale grid");
  std::vector<std::size_t> out;
  if (count == 1 || min == max) {
    out.push_back(min);
    return out;
  }
  const double step = static_cast<double>(max - min) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) {
    const auto s = static_cast<std::size_t>(std::llround(static_cast<double>(min) + step * static_cast<double>(k)));
    if (out.empty() || out.back() != s) out.push_back(s);
  }
  return out;
}

}  // namespace twophase

#endif  // TWOPHASE_WINDOWS_HPP_
