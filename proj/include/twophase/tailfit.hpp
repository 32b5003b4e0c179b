#ifndef TWOPHASE_TAILFIT_HPP_
#define TWOPHASE_TAILFIT_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "twophase/error.hpp"
#include "twophase/parallel.hpp"
#include "twophase/series.hpp"
#include "twophase/windows.hpp"

namespace twophase {

// Exponents here are CCDF exponents: P(X >= x) = (x / i_min)^(-zeta). The
// density exponent is zeta + 1.

enum class LsWeighting { kCounts, kUniform };

struct TailConfig {
  std::size_t min_tail = 50;
  std::size_t max_candidates = 1000;
  double log_bin_ratio = 1.25;
  std::size_t min_ls_bins = 5;
  LsWeighting ls_weighting = LsWeighting::kCounts;

  void validate() const {
    if (min_tail < 2) throw InputError("min_tail must be >= 2");
    if (max_candidates < 1) throw InputError("max_candidates must be >= 1");
    if (!(log_bin_ratio > 1.0)) throw InputError("log_bin_ratio must be > 1");
    if (min_ls_bins < 2) throw InputError("min_ls_bins must be >= 2");
  }
};

struct TailFit {
  double i_min = 0.0;
  double zeta_ks = 0.0;
  double zeta_ls = 0.0;
  double zeta_avg = 0.0;
  double stderr_ks = 0.0;
  double ks_stat = 0.0;
  std::size_t n_tail = 0;
};

struct Exponent {
  double zeta = 0.0;
  double stderr_ = 0.0;
};

namespace detail {

inline void check_samples(const std::vector<double>& s) {
  for (double x : s)
    if (!std::isfinite(x) || x < 0.0)
      throw InputError("samples must be finite and non-negative");
}

// KS distance of a sorted tail against the power law with lower bound i_min.
inline double ks_sorted(const double* tail, std::size_t n, double i_min, double zeta) {
  const double inv_n = 1.0 / static_cast<double>(n);
  double d = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double f = 1.0 - std::pow(tail[k] / i_min, -zeta);
    d = std::max(d, std::max(static_cast<double>(k + 1) * inv_n - f, f - static_cast<double>(k) * inv_n));
  }
  return d;
}

}  // namespace detail

inline Exponent mle_exponent(const std::vector<double>& samples, double i_min,
                             std::size_t min_tail = 50) {
  if (!(i_min > 0.0)) throw InputError("i_min must be positive");
  double log_sum = 0.0;
  std::size_t n = 0;
  for (double x : samples) {
    if (!std::isfinite(x) || x <= 0.0) throw InputError("samples must be finite and positive");
    if (x >= i_min) {
      log_sum += std::log(x / i_min);
      ++n;
    }
  }
  if (n < min_tail)
    throw GuardError("only " + std::to_string(n) + " samples at or above i_min, need " +
                     std::to_string(min_tail));
  if (!(log_sum > 0.0)) throw GuardError("tail has no spread above i_min");
  const double zeta = static_cast<double>(n) / log_sum;
  return {zeta, zeta / std::sqrt(static_cast<double>(n))};
}

inline double ks_distance(const std::vector<double>& samples, double i_min, double zeta) {
  if (!(i_min > 0.0) || !(zeta > 0.0)) throw InputError("i_min and zeta must be positive");
  std::vector<double> tail;
  for (double x : samples)
    if (x >= i_min) tail.push_back(x);
  if (tail.empty()) throw GuardError("empty tail");
  std::sort(tail.begin(), tail.end());
  return detail::ks_sorted(tail.data(), tail.size(), i_min, zeta);
}

// KS-minimizing lower bound with its MLE exponent. Candidates are the distinct
// positive sample values leaving at least min_tail samples, thinned to
// max_candidates quantile-spaced values. Ties go to the smallest candidate.
inline TailFit select_lower_bound(const std::vector<double>& samples, const TailConfig& cfg = {},
                                  unsigned jobs = 1) {
  cfg.validate();
  detail::check_samples(samples);
  std::vector<double> x;
  x.reserve(samples.size());
  for (double v : samples)
    if (v > 0.0) x.push_back(v);
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  if (n < cfg.min_tail)
    throw GuardError("only " + std::to_string(n) + " positive samples, need " +
                     std::to_string(cfg.min_tail));

  // Start index of each distinct value that leaves enough tail behind it.
  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k + cfg.min_tail <= n; ++k)
    if (k == 0 || x[k] != x[k - 1]) starts.push_back(k);
  if (starts.size() > cfg.max_candidates) {
    std::vector<std::size_t> thinned;
    for (std::size_t c = 0; c < cfg.max_candidates; ++c) {
      const std::size_t pick = c * (starts.size() - 1) / (cfg.max_candidates - 1 == 0 ? 1 : cfg.max_candidates - 1);
      if (thinned.empty() || thinned.back() != starts[pick]) thinned.push_back(starts[pick]);
    }
    starts.swap(thinned);
  }
  if (starts.empty()) throw GuardError("no candidate lower bound leaves enough tail samples");

  std::vector<double> suffix_log(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) suffix_log[k] = suffix_log[k + 1] + std::log(x[k]);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(starts.size(), kInf), zetas(starts.size(), 0.0);
  parallel_for(starts.size(), jobs, [&](std::size_t c) {
    const std::size_t j = starts[c];
    const std::size_t m = n - j;
    const double log_sum = suffix_log[j] - static_cast<double>(m) * std::log(x[j]);
    if (!(log_sum > 0.0)) return;
    zetas[c] = static_cast<double>(m) / log_sum;
    dist[c] = detail::ks_sorted(x.data() + j, m, x[j], zetas[c]);
  });
  std::size_t best = starts.size();
  for (std::size_t c = 0; c < starts.size(); ++c)
    if (dist[c] < kInf && (best == starts.size() || dist[c] < dist[best])) best = c;
  if (best == starts.size()) throw GuardError("no tail variation above any candidate lower bound");

  TailFit fit;
  fit.i_min = x[starts[best]];
  fit.n_tail = n - starts[best];
  fit.zeta_ks = zetas[best];
  fit.stderr_ks = fit.zeta_ks / std::sqrt(static_cast<double>(fit.n_tail));
  fit.ks_stat = dist[best];
  return fit;
}

struct LogBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double density = 0.0;  // count / (width * n_tail)
};

inline std::vector<LogBin> log_histogram(const std::vector<double>& samples, double i_min,
                                         double ratio) {
  std::vector<double> tail;
  for (double x : samples)
    if (x >= i_min) tail.push_back(x);
  if (tail.empty()) throw GuardError("empty tail");
  const double top = *std::max_element(tail.begin(), tail.end());
  const auto nbins = static_cast<std::size_t>(std::floor(std::log(top / i_min) / std::log(ratio))) + 1;
  std::vector<LogBin> bins(nbins);
  for (std::size_t k = 0; k < nbins; ++k) {
    bins[k].lower = i_min * std::pow(ratio, static_cast<double>(k));
    bins[k].upper = i_min * std::pow(ratio, static_cast<double>(k + 1));
  }
  for (double x : tail) {
    auto k = static_cast<std::size_t>(std::floor(std::log(x / i_min) / std::log(ratio)));
    k = std::min(k, nbins - 1);
    // Guard against log rounding at the edges.
    if (k > 0 && x < bins[k].lower) --k;
    else if (k + 1 < nbins && x >= bins[k].upper) ++k;
    ++bins[k].count;
  }
  const double n_tail = static_cast<double>(tail.size());
  for (auto& b : bins) b.density = static_cast<double>(b.count) / ((b.upper - b.lower) * n_tail);
  return bins;
}

// Least squares on (log geometric bin centre, log density) over occupied
// log-bins. Count weighting keeps the sparse far-tail bins, whose log density
// is dominated by Poisson noise and biased by empty neighbours, from steering
// the slope.
inline double ls_exponent(const std::vector<double>& samples, double i_min,
                          const TailConfig& cfg = {}) {
  cfg.validate();
  if (!(i_min > 0.0)) throw InputError("i_min must be positive");
  const auto bins = log_histogram(samples, i_min, cfg.log_bin_ratio);
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t occupied = 0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    ++occupied;
    const double w = cfg.ls_weighting == LsWeighting::kCounts ? static_cast<double>(b.count) : 1.0;
    const double lx = 0.5 * (std::log(b.lower) + std::log(b.upper));
    const double ly = std::log(b.density);
    sw += w;
    sx += w * lx;
    sy += w * ly;
    sxx += w * lx * lx;
    sxy += w * lx * ly;
  }
  if (occupied < cfg.min_ls_bins)
    throw GuardError(std::to_string(occupied) + " occupied log-bins, need " +
                     std::to_string(cfg.min_ls_bins));
  const double slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
  return std::abs(slope) - 1.0;
}

inline TailFit fit_tail(const std::vector<double>& samples, const TailConfig& cfg = {},
                        unsigned jobs = 1) {
  TailFit fit = select_lower_bound(samples, cfg, jobs);
  fit.zeta_ls = ls_exponent(samples, fit.i_min, cfg);
  fit.zeta_avg = (fit.zeta_ks + fit.zeta_ls) / 2.0;
  return fit;
}

// Empirical P(X >= x) at each distinct sample value.
inline std::vector<std::pair<double, double>> ccdf_points(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k)
    if (k == 0 || samples[k] != samples[k - 1])
      out.emplace_back(samples[k], static_cast<double>(samples.size() - k) / n);
  return out;
}

// Two-sample sup distance between empirical CDFs of sorted samples.
inline double cdf_sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw GuardError("empty sample in CDF comparison");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

struct CollapseScale {
  std::size_t scale = 0;
  double dispersion = 0.0;             // mean absolute deviation of Z
  std::vector<double> rescaled;        // sorted Z / dispersion
  std::vector<std::pair<double, double>> pdf;  // (Z / s, s * p(Z))
};

struct CollapseReport {
  std::vector<CollapseScale> scales;
  std::vector<std::vector<double>> discrepancy;
  double score = 0.0;
};

struct CollapseConfig {
  std::size_t min_windows = 100;
  std::size_t pdf_bins = 60;
  double pdf_half_range = 6.0;  // in rescaled units
};

// Disjoint-window Z at each scale, rescaled by its mean absolute deviation.
// The score is the largest pairwise sup distance between rescaled CDFs.
inline CollapseReport collapse(const IncrementSeries& incs, const std::vector<std::size_t>& scales,
                               const CollapseConfig& cfg = {}) {
  if (scales.size() < 2) throw InputError("collapse needs at least two scales");
  CollapseReport out;
  for (std::size_t scale : scales) {
    const auto ws = window_stats(incs, scale, scale);
    std::vector<double> z;
    for (const auto& e : ws.entries)
      if (e.valid) z.push_back(e.z);
    if (z.size() < cfg.min_windows)
      throw GuardError("scale " + std::to_string(scale) + ": " + std::to_string(z.size()) +
                       " windows, need " + std::to_string(cfg.min_windows));
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
    double mad = 0.0;
    for (double v : z) mad += std::abs(v - mean);
    mad /= static_cast<double>(z.size());
    if (!(mad > 0.0)) throw GuardError("scale " + std::to_string(scale) + ": Z has no spread");

    CollapseScale cs;
    cs.scale = scale;
    cs.dispersion = mad;
    cs.rescaled.reserve(z.size());
    for (double v : z) cs.rescaled.push_back(v / mad);
    std::sort(cs.rescaled.begin(), cs.rescaled.end());

    const double w = 2.0 * cfg.pdf_half_range / static_cast<double>(cfg.pdf_bins);
    std::vector<std::size_t> counts(cfg.pdf_bins, 0);
    for (double v : cs.rescaled) {
      const double pos = (v + cfg.pdf_half_range) / w;
      if (pos >= 0.0 && pos < static_cast<double>(cfg.pdf_bins)) ++counts[static_cast<std::size_t>(pos)];
    }
    const double n = static_cast<double>(cs.rescaled.size());
    for (std::size_t k = 0; k < cfg.pdf_bins; ++k)
      if (counts[k] > 0)
        cs.pdf.emplace_back(-cfg.pdf_half_range + (static_cast<double>(k) + 0.5) * w,
                            static_cast<double>(counts[k]) / (n * w));
    out.scales.push_back(std::move(cs));
  }
  const std::size_t m = out.scales.size();
  out.discrepancy.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const double d = cdf_sup_distance(out.scales[a].rescaled, out.scales[b].rescaled);
      out.discrepancy[a][b] = out.discrepancy[b][a] = d;
      out.score = std::max(out.score, d);
    }
  return out;
}

}  // namespace twophase

#endif  // TWOPHASE_TAILFIT_HPP_
