#ifndef TWOPHASE_CONDDIST_HPP_
#define TWOPHASE_CONDDIST_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twophase/error.hpp"
#include "twophase/parallel.hpp"
#include "twophase/series.hpp"
#include "twophase/windows.hpp"

namespace twophase {

enum class RBinning { kQuantile, kFixed };

// What gets histogrammed inside each r-bin.
//   kRatio: the dimensionless Z/r over +-scale^2/(scale-1), i.e. twice the
//           position a single dominant jump lands at.
//   kRaw:   Z in index points on Freedman-Diaconis edges from the pooled sample.
enum class ZCoordinate { kRatio, kRaw };

inline std::string_view to_string(RBinning b) {
  return b == RBinning::kQuantile ? "quantile" : "fixed";
}
inline std::string_view to_string(ZCoordinate c) {
  return c == ZCoordinate::kRatio ? "ratio" : "raw";
}
inline RBinning parse_rbinning(std::string_view s) {
  if (s == "quantile") return RBinning::kQuantile;
  if (s == "fixed") return RBinning::kFixed;
  throw InputError("unknown r-binning '" + std::string(s) + "' (expected quantile or fixed)");
}
inline ZCoordinate parse_zcoordinate(std::string_view s) {
  if (s == "ratio") return ZCoordinate::kRatio;
  if (s == "raw") return ZCoordinate::kRaw;
  throw InputError("unknown z-coordinate '" + std::string(s) + "' (expected ratio or raw)");
}

struct DetectorParams {
  std::size_t r_bins = 48;
  RBinning r_binning = RBinning::kQuantile;
  ZCoordinate z_coordinate = ZCoordinate::kRatio;
  std::size_t z_bins = 36;          // ratio coordinate only
  std::size_t smoothing = 5;        // binomial [1/4, 1/2, 1/4] passes
  double prominence = 0.1;          // relative to the smoothed global maximum
  double broad_width = 0.5;         // FWHM fraction marking a flat single mode; >= 1 disables
  std::size_t persist = 4;
  std::size_t min_samples = 200;
  bool unimodal_majority = true;
  std::size_t stride = 1;

  void validate() const {
    if (r_bins < 1) throw InputError("r_bins must be >= 1");
    if (z_coordinate == ZCoordinate::kRatio && z_bins < 3) throw InputError("z_bins must be >= 3");
    if (!(prominence >= 0.0 && prominence <= 1.0))
      throw InputError("prominence must lie in [0, 1]");
    if (!(broad_width > 0.0)) throw InputError("broad_width must be > 0");
    if (persist < 1) throw InputError("persist must be >= 1");
    if (min_samples < 1) throw InputError("min_samples must be >= 1");
    if (stride < 1) throw InputError("stride must be >= 1");
  }
};

struct RBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;         // valid windows assigned to the bin
  std::size_t out_of_range = 0;  // of those, samples outside the Z edges
  std::vector<double> mass;      // normalized over in-range samples

  double midpoint() const { return 0.5 * (lower + upper); }
};

struct ConditionalDistribution {
  std::size_t scale = 0;
  ZCoordinate coordinate = ZCoordinate::kRatio;
  std::vector<double> z_edges;  // shared by every r-bin, symmetric about 0
  std::vector<RBin> bins;

  std::vector<double> z_centers() const {
    std::vector<double> c(z_edges.size() - 1);
    for (std::size_t k = 0; k + 1 < z_edges.size(); ++k) c[k] = 0.5 * (z_edges[k] + z_edges[k + 1]);
    return c;
  }
};

namespace detail {

// Freedman-Diaconis width, falling back to Scott's rule when the IQR vanishes.
inline double freedman_diaconis(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  const double n = static_cast<double>(v.size());
  double width = 2.0 * (q(0.75) - q(0.25)) / std::cbrt(n);
  if (!(width > 0.0)) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    width = 3.49 * std::sqrt(ss / n) / std::cbrt(n);
  }
  return width;
}

inline std::vector<double> symmetric_edges(double half_range, std::size_t bins) {
  std::vector<double> e(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    e[k] = -half_range + 2.0 * half_range * static_cast<double>(k) / static_cast<double>(bins);
  e[bins] = half_range;
  return e;
}

// Raw-coordinate edges: FD width on the pooled Z, half range at the 99.5%
// quantile of |Z|, capped at kMaxRawBins by widening.
inline std::vector<double> raw_edges(const std::vector<double>& z) {
  constexpr std::size_t kMaxRawBins = 400;
  std::vector<double> a(z.size());
  std::transform(z.begin(), z.end(), a.begin(), [](double x) { return std::abs(x); });
  std::sort(a.begin(), a.end());
  const double reach = a[static_cast<std::size_t>(0.995 * static_cast<double>(a.size() - 1))];
  double width = freedman_diaconis(z);
  if (!(reach > 0.0) || !(width > 0.0)) return symmetric_edges(1.0, 2);
  auto half_bins = static_cast<std::size_t>(std::ceil(reach / width));
  if (2 * half_bins > kMaxRawBins) {
    half_bins = kMaxRawBins / 2;
    width = reach / static_cast<double>(half_bins);
  }
  return symmetric_edges(width * static_cast<double>(half_bins), 2 * half_bins);
}

inline double z_value(const WindowEntry& e, ZCoordinate c) {
  if (c == ZCoordinate::kRaw) return e.z;
  return e.r > 0.0 ? e.z / e.r : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

// Groups valid windows by r and histograms Z (or Z/r) per group on shared edges.
// Quantile binning places edges at equal-count positions of the sorted r and
// merges repeated edges, so a constant r yields one bin.
inline ConditionalDistribution condition(const WindowStats& ws, const DetectorParams& p) {
  p.validate();
  std::vector<const WindowEntry*> valid;
  valid.reserve(ws.entries.size());
  for (const auto& e : ws.entries)
    if (e.valid) valid.push_back(&e);
  if (valid.size() < p.min_samples)
    throw GuardError("scale " + std::to_string(ws.scale) + ": " + std::to_string(valid.size()) +
                     " valid windows, below min_samples " + std::to_string(p.min_samples));
  std::stable_sort(valid.begin(), valid.end(),
                   [](const WindowEntry* a, const WindowEntry* b) { return a->r < b->r; });
  const std::size_t n = valid.size();
  const double r_lo = valid.front()->r;
  const double r_hi = valid.back()->r;

  // Interior edges; bin k is [edges[k], edges[k+1]), the last bin closed.
  std::vector<double> edges{r_lo};
  for (std::size_t b = 1; b < p.r_bins; ++b) {
    const double e = p.r_binning == RBinning::kQuantile
                         ? valid[b * n / p.r_bins]->r
                         : r_lo + (r_hi - r_lo) * static_cast<double>(b) / static_cast<double>(p.r_bins);
    if (e > edges.back()) edges.push_back(e);
  }
  // A quantile edge may land on r_hi itself; the top bin is then [r_hi, r_hi].
  edges.push_back(r_hi);
  const std::size_t nb = edges.size() - 1;

  ConditionalDistribution out;
  out.scale = ws.scale;
  out.coordinate = p.z_coordinate;
  if (p.z_coordinate == ZCoordinate::kRatio) {
    const double s = static_cast<double>(ws.scale);
    out.z_edges = detail::symmetric_edges(s * s / (s - 1.0), p.z_bins);
  } else {
    std::vector<double> z(n);
    for (std::size_t k = 0; k < n; ++k) z[k] = valid[k]->z;
    out.z_edges = detail::raw_edges(z);
  }
  const std::size_t nz = out.z_edges.size() - 1;
  const double z_lo = out.z_edges.front();
  const double z_hi = out.z_edges.back();
  const double z_w = (z_hi - z_lo) / static_cast<double>(nz);

  out.bins.resize(nb);
  std::vector<std::vector<double>> counts(nb, std::vector<double>(nz, 0.0));
  std::size_t bin = 0;
  for (const WindowEntry* e : valid) {
    while (bin + 1 < nb && e->r >= edges[bin + 1]) ++bin;
    auto& rb = out.bins[bin];
    ++rb.count;
    const double x = detail::z_value(*e, p.z_coordinate);
    if (!(x >= z_lo && x <= z_hi)) {
      ++rb.out_of_range;
      continue;
    }
    auto k = static_cast<std::size_t>((x - z_lo) / z_w);
    counts[bin][std::min(k, nz - 1)] += 1.0;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    auto& rb = out.bins[b];
    rb.lower = edges[b];
    rb.upper = edges[b + 1];
    const double in_range = static_cast<double>(rb.count - rb.out_of_range);
    rb.mass = counts[b];
    if (in_range > 0)
      for (double& m : rb.mass) m /= in_range;
  }
  return out;
}

// Binomial smoothing, zero padded. Each pass is a convolution with a
// Polya-frequency kernel and so never adds local maxima.
inline std::vector<double> smooth(std::vector<double> h, std::size_t passes) {
  std::vector<double> next(h.size());
  for (std::size_t p = 0; p < passes; ++p) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double left = i > 0 ? h[i - 1] : 0.0;
      const double right = i + 1 < h.size() ? h[i + 1] : 0.0;
      next[i] = 0.25 * left + 0.5 * h[i] + 0.25 * right;
    }
    h.swap(next);
  }
  return h;
}

struct Modes {
  std::size_t count = 0;
  std::vector<double> locations;
  double fwhm_fraction = 0.0;  // width at half maximum over the histogram range
};

// Local maxima of the smoothed histogram with topographic prominence at least
// `prominence` times the global maximum. A plateau counts once, at its centre.
inline Modes count_modes(const std::vector<double>& hist, const std::vector<double>& centers,
                         std::size_t smoothing, double prominence) {
  if (hist.empty() || hist.size() != centers.size()) throw GuardError("empty histogram");
  const auto h = smooth(hist, smoothing);
  const std::size_t n = h.size();
  const double peak = *std::max_element(h.begin(), h.end());
  if (!(peak > 0.0)) throw GuardError("histogram has no mass");

  Modes out;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && h[j + 1] == h[i]) ++j;
    const double left = i > 0 ? h[i - 1] : 0.0;
    const double right = j + 1 < n ? h[j + 1] : 0.0;
    if (h[i] > left && h[i] > right) {
      // Lowest point on the way to higher ground on each side; the floor (0)
      // if there is no higher ground.
      double left_min = h[i], right_min = h[i];
      bool left_higher = false, right_higher = false;
      for (std::size_t a = i; a-- > 0;) {
        if (h[a] > h[i]) { left_higher = true; break; }
        left_min = std::min(left_min, h[a]);
      }
      for (std::size_t b = j + 1; b < n; ++b) {
        if (h[b] > h[i]) { right_higher = true; break; }
        right_min = std::min(right_min, h[b]);
      }
      const double base = std::max(left_higher ? left_min : 0.0, right_higher ? right_min : 0.0);
      if (h[i] - base >= prominence * peak) {
        ++out.count;
        out.locations.push_back(0.5 * (centers[i] + centers[j]));
      }
    }
    i = j + 1;
  }
  std::size_t first = n, last = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (h[i] >= 0.5 * peak) {
      first = std::min(first, i);
      last = i;
    }
  out.fwhm_fraction = static_cast<double>(last - first + 1) / static_cast<double>(n);
  return out;
}

enum class Modality { kInsufficient, kUnimodal, kBroad, kBimodal, kMultimodal };

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kInsufficient: return "insufficient";
    case Modality::kUnimodal: return "unimodal";
    case Modality::kBroad: return "broad";
    case Modality::kBimodal: return "bimodal";
    case Modality::kMultimodal: return "multimodal";
  }
  return "?";
}

struct BinModality {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  std::size_t mode_count = 0;
  std::vector<double> mode_locations;
  Modality modality = Modality::kInsufficient;
};

struct ModalityReport {
  std::size_t scale = 0;
  std::vector<BinModality> bins;
  std::optional<double> r_c;
  bool present = false;
  std::string reason;
};

// Verdict over a sequence of bin classes. Insufficient and broad bins are
// neutral. Present when, after the last unimodal bin, every remaining
// classified bin is bimodal, there are at least `persist` of them, and (if
// required) they do not outnumber the unimodal bins.
inline bool bifurcation_verdict(const std::vector<Modality>& cls, std::size_t persist,
                                bool unimodal_majority, std::string* reason = nullptr) {
  const auto say = [&](std::string s) {
    if (reason) *reason = std::move(s);
  };
  std::optional<std::size_t> last_uni;
  std::size_t n_uni = 0;
  for (std::size_t b = 0; b < cls.size(); ++b)
    if (cls[b] == Modality::kUnimodal) {
      last_uni = b;
      ++n_uni;
    }
  if (!last_uni) {
    say("no unimodal bin");
    return false;
  }
  std::size_t n_bi = 0;
  for (std::size_t b = *last_uni + 1; b < cls.size(); ++b) {
    if (cls[b] == Modality::kMultimodal) {
      say("multimodal bin above the last unimodal bin");
      return false;
    }
    if (cls[b] == Modality::kBimodal) ++n_bi;
  }
  if (n_bi < persist) {
    say(std::to_string(n_bi) + " bimodal bins above the last unimodal bin, need " +
        std::to_string(persist));
    return false;
  }
  if (unimodal_majority && n_bi > n_uni) {
    say(std::to_string(n_bi) + " bimodal bins outnumber " + std::to_string(n_uni) +
        " unimodal bins");
    return false;
  }
  say("bifurcation");
  return true;
}

inline ModalityReport classify(const ConditionalDistribution& cond, const DetectorParams& p) {
  ModalityReport out;
  out.scale = cond.scale;
  const auto centers = cond.z_centers();
  std::vector<Modality> cls;
  for (const auto& rb : cond.bins) {
    BinModality bm{rb.lower, rb.upper, rb.count, 0, {}, Modality::kInsufficient};
    const std::size_t in_range = rb.count - rb.out_of_range;
    if (rb.count >= p.min_samples && in_range > 0) {
      auto m = count_modes(rb.mass, centers, p.smoothing, p.prominence);
      bm.mode_count = m.count;
      bm.mode_locations = std::move(m.locations);
      if (m.count >= 3) bm.modality = Modality::kMultimodal;
      else if (m.count == 2) bm.modality = Modality::kBimodal;
      else bm.modality = m.fwhm_fraction > p.broad_width ? Modality::kBroad : Modality::kUnimodal;
    }
    cls.push_back(bm.modality);
    out.bins.push_back(std::move(bm));
  }

  // r_c: first bimodal bin above the last unimodal one.
  std::size_t start = 0;
  for (std::size_t b = 0; b < cls.size(); ++b)
    if (cls[b] == Modality::kUnimodal) start = b + 1;
  for (std::size_t b = start; b < cls.size(); ++b)
    if (cls[b] == Modality::kBimodal) {
      out.r_c = 0.5 * (out.bins[b].lower + out.bins[b].upper);
      break;
    }
  bool any_classified = std::any_of(cls.begin(), cls.end(),
                                    [](Modality m) { return m != Modality::kInsufficient; });
  if (!any_classified) {
    out.reason = "every r-bin below min_samples";
    return out;
  }
  out.present = bifurcation_verdict(cls, p.persist, p.unimodal_majority, &out.reason);
  return out;
}

struct ScaleVerdict {
  std::size_t scale = 0;
  bool present = false;
  std::optional<double> r_c;
  std::string reason;
};

struct ScaleRange {
  std::size_t first = 0;
  std::size_t last = 0;
  bool intersects(std::size_t lo, std::size_t hi) const { return first <= hi && lo <= last; }
};

struct PhaseScan {
  std::vector<ScaleVerdict> scales;
  std::optional<ScaleRange> range;  // longest contiguous present run, earliest on ties

  bool any_present() const { return range.has_value(); }
};

inline std::optional<ScaleRange> longest_present_run(const std::vector<ScaleVerdict>& v) {
  std::optional<ScaleRange> best;
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < v.size();) {
    if (!v[i].present) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1].present) ++j;
    if (j - i + 1 > best_len) {
      best_len = j - i + 1;
      best = ScaleRange{v[i].scale, v[j].scale};
    }
    i = j + 1;
  }
  return best;
}

struct ScaleDetail {
  ConditionalDistribution cond;
  ModalityReport report;
};

inline ScaleDetail analyse_scale(const IncrementSeries& incs, std::size_t scale,
                                 const DetectorParams& p) {
  auto cond = condition(window_stats(incs, scale, p.stride), p);
  auto report = classify(cond, p);
  return {std::move(cond), std::move(report)};
}

// Scans the (ascending, distinct) scales. Each scale writes its own slot, so
// the result is identical for any `jobs`. When `details` is non-null it
// receives the per-scale distributions and reports.
inline PhaseScan scan(const IncrementSeries& incs, const std::vector<std::size_t>& scales,
                      const DetectorParams& p, unsigned jobs = 1,
                      std::vector<ScaleDetail>* details = nullptr) {
  p.validate();
  if (scales.empty()) throw InputError("no scales to scan");
  for (std::size_t k = 1; k < scales.size(); ++k)
    if (scales[k] <= scales[k - 1]) throw InputError("scales must be strictly ascending");
  std::vector<ScaleDetail> slots(scales.size());
  parallel_for(scales.size(), jobs, [&](std::size_t k) {
    slots[k] = analyse_scale(incs, scales[k], p);
  });
  PhaseScan out;
  for (const auto& s : slots)
    out.scales.push_back({s.report.scale, s.report.present, s.report.r_c, s.report.reason});
  out.range = longest_present_run(out.scales);
  if (details) *details = std::move(slots);
  return out;
}

}  // namespace twophase

#endif  // TWOPHASE_CONDDIST_HPP_
