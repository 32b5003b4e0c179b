#ifndef TWOPHASE_SURROGATE_HPP_
#define TWOPHASE_SURROGATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "twophase/conddist.hpp"
#include "twophase/error.hpp"
#include "twophase/parallel.hpp"
#include "twophase/rng.hpp"
#include "twophase/series.hpp"

namespace twophase {

struct SurrogateSpec {
  double zeta = 1.5;   // CCDF exponent
  double i_min = 7.0;
  std::size_t n = 25000;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(zeta > 0.0) || !std::isfinite(zeta)) throw InputError("zeta must be positive");
    if (!(i_min > 0.0) || !std::isfinite(i_min)) throw InputError("i_min must be positive");
    if (n < 2) throw InputError("n must be >= 2");
  }
};

// Inverse transform of a uniform draw on [0, 1).
inline double pareto_quantile(double u, double zeta, double i_min) {
  return i_min * std::pow(1.0 - u, -1.0 / zeta);
}

inline std::vector<double> sample_abs_increments(const SurrogateSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, Stream::kMagnitudes);
  std::vector<double> out(spec.n);
  for (auto& x : out) x = pareto_quantile(rng.uniform01(), spec.zeta, spec.i_min);
  return out;
}

inline IncrementSeries assign_signs(const std::vector<double>& abs, std::uint64_t seed) {
  if (abs.empty()) throw InputError("no magnitudes to sign");
  Rng rng(seed, Stream::kSigns);
  IncrementSeries out;
  out.absolute = abs;
  out.signed_values.resize(abs.size());
  for (std::size_t k = 0; k < abs.size(); ++k) out.signed_values[k] = rng.coin() ? abs[k] : -abs[k];
  out.crossing.assign(abs.size(), 0);
  return out;
}

inline IncrementSeries surrogate_increments(const SurrogateSpec& spec) {
  return assign_signs(sample_abs_increments(spec), spec.seed);
}

// Unit-variance Gaussian increments (Box-Muller), the unimodal null.
inline IncrementSeries gaussian_increments(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw InputError("n must be >= 2");
  Rng rng(seed, Stream::kGaussian);
  std::vector<double> v(n);
  for (auto& x : v) {
    const double u1 = 1.0 - rng.uniform01();
    const double u2 = rng.uniform01();
    x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  return IncrementSeries::from_signed(std::move(v));
}

inline PhaseScan run_experiment(const SurrogateSpec& spec, const std::vector<std::size_t>& scales,
                                const DetectorParams& params, unsigned jobs = 1) {
  return scan(surrogate_increments(spec), scales, params, jobs);
}

struct SweepCell {
  double zeta = 0.0;
  std::uint64_t seed = 0;
  PhaseScan scan;
};

struct ZetaSummary {
  double zeta = 0.0;
  std::size_t runs = 0;
  std::size_t present = 0;
  double present_fraction = 0.0;
  // Over the longest present ranges of the seeds that had one.
  std::optional<ScaleRange> range_union;
  std::optional<ScaleRange> range_intersection;
  std::vector<double> per_scale_fraction;  // aligned with SweepResult::scales
};

struct SweepResult {
  std::vector<std::size_t> scales;
  std::vector<SweepCell> cells;  // zeta-major, seeds in the given order
  std::vector<ZetaSummary> summary;
};

// Cartesian product zetas x seeds; `base` supplies i_min and n. Cells run in
// parallel across (zeta, seed), each scan serially, and results land in fixed
// slots.
inline SweepResult sweep(const std::vector<double>& zetas, const std::vector<std::uint64_t>& seeds,
                         const SurrogateSpec& base, const std::vector<std::size_t>& scales,
                         const DetectorParams& params, unsigned jobs = 1) {
  if (zetas.empty()) throw InputError("empty zeta list");
  if (seeds.empty()) throw InputError("empty seed list");
  SweepResult out;
  out.scales = scales;
  out.cells.resize(zetas.size() * seeds.size());
  for (std::size_t zi = 0; zi < zetas.size(); ++zi)
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      auto& c = out.cells[zi * seeds.size() + si];
      c.zeta = zetas[zi];
      c.seed = seeds[si];
      SurrogateSpec s = base;
      s.zeta = zetas[zi];
      s.seed = seeds[si];
      s.validate();
    }
  parallel_for(out.cells.size(), jobs, [&](std::size_t k) {
    auto& c = out.cells[k];
    SurrogateSpec s = base;
    s.zeta = c.zeta;
    s.seed = c.seed;
    c.scan = run_experiment(s, scales, params, 1);
  });

  for (std::size_t zi = 0; zi < zetas.size(); ++zi) {
    ZetaSummary z;
    z.zeta = zetas[zi];
    z.runs = seeds.size();
    z.per_scale_fraction.assign(scales.size(), 0.0);
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const auto& sc = out.cells[zi * seeds.size() + si].scan;
      for (std::size_t k = 0; k < sc.scales.size(); ++k)
        if (sc.scales[k].present) z.per_scale_fraction[k] += 1.0;
      if (!sc.range) continue;
      const auto& r = *sc.range;
      if (z.present == 0) {
        z.range_union = r;
        z.range_intersection = r;
      } else {
        z.range_union->first = std::min(z.range_union->first, r.first);
        z.range_union->last = std::max(z.range_union->last, r.last);
        if (z.range_intersection) {
          const std::size_t lo = std::max(z.range_intersection->first, r.first);
          const std::size_t hi = std::min(z.range_intersection->last, r.last);
          if (lo <= hi) z.range_intersection = ScaleRange{lo, hi};
          else z.range_intersection.reset();
        }
      }
      ++z.present;
    }
    for (auto& f : z.per_scale_fraction) f /= static_cast<double>(seeds.size());
    z.present_fraction = static_cast<double>(z.present) / static_cast<double>(seeds.size());
    out.summary.push_back(std::move(z));
  }
  return out;
}

}  // namespace twophase

#endif  // TWOPHASE_SURROGATE_HPP_
