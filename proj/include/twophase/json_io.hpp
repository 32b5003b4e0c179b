#ifndef TWOPHASE_JSON_IO_HPP_
#define TWOPHASE_JSON_IO_HPP_

// JSON and gnuplot .dat renderings of the analysis results. Everything here is
// a pure function of its input, so reruns produce byte-identical text.

#include <charconv>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "twophase/conddist.hpp"
#include "twophase/series.hpp"
#include "twophase/surrogate.hpp"
#include "twophase/tailfit.hpp"

namespace twophase {

using Json = nlohmann::ordered_json;

namespace detail {

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json range_json(const std::optional<ScaleRange>& r) {
  if (!r) return nullptr;
  return Json{{"first", r->first}, {"last", r->last}};
}

// Shortest round-trip form, independent of locale.
inline std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline Json to_json(const DetectorParams& p) {
  return Json{{"r-bins", p.r_bins},
              {"r-binning", to_string(p.r_binning)},
              {"z-coordinate", to_string(p.z_coordinate)},
              {"z-bins", p.z_bins},
              {"smoothing", p.smoothing},
              {"prominence", p.prominence},
              {"broad-width", p.broad_width},
              {"persist", p.persist},
              {"min-samples", p.min_samples},
              {"unimodal-majority", p.unimodal_majority},
              {"stride", p.stride}};
}

inline Json to_json(const TailConfig& c) {
  return Json{{"min-tail", c.min_tail},
              {"max-candidates", c.max_candidates},
              {"log-bin-ratio", c.log_bin_ratio},
              {"min-ls-bins", c.min_ls_bins},
              {"ls-weighting", c.ls_weighting == LsWeighting::kCounts ? "counts" : "uniform"}};
}

inline Json to_json(const SurrogateSpec& s) {
  return Json{{"zeta", s.zeta}, {"imin", s.i_min}, {"n", s.n}, {"seed", s.seed}};
}

inline Json to_json(const TailFit& f) {
  return Json{{"i_min", f.i_min},       {"zeta_ks", f.zeta_ks}, {"zeta_ls", f.zeta_ls},
              {"zeta_avg", f.zeta_avg}, {"stderr", f.stderr_ks}, {"ks_stat", f.ks_stat},
              {"n_tail", f.n_tail}};
}

inline Json to_json(const ModalityReport& r) {
  Json bins = Json::array();
  for (const auto& b : r.bins)
    bins.push_back(Json{{"r_lower", b.lower},
                        {"r_upper", b.upper},
                        {"count", b.count},
                        {"mode_count", b.mode_count},
                        {"mode_locations", b.mode_locations},
                        {"classification", to_string(b.modality)}});
  return Json{{"scale", r.scale},
              {"verdict", r.present ? "present" : "absent"},
              {"reason", r.reason},
              {"r_c", detail::optional_json(r.r_c)},
              {"bins", std::move(bins)}};
}

inline Json to_json(const PhaseScan& s) {
  Json scales = Json::array();
  for (const auto& v : s.scales)
    scales.push_back(Json{{"scale", v.scale},
                          {"verdict", v.present ? "present" : "absent"},
                          {"r_c", detail::optional_json(v.r_c)},
                          {"reason", v.reason}});
  return Json{{"scales", std::move(scales)}, {"range", detail::range_json(s.range)}};
}

inline Json to_json(const SweepResult& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    std::vector<std::size_t> present;
    for (const auto& v : c.scan.scales)
      if (v.present) present.push_back(v.scale);
    cells.push_back(Json{{"zeta", c.zeta},
                         {"seed", c.seed},
                         {"present", c.scan.any_present()},
                         {"range", detail::range_json(c.scan.range)},
                         {"present_scales", present}});
  }
  Json summary = Json::array();
  for (const auto& z : r.summary)
    summary.push_back(Json{{"zeta", z.zeta},
                           {"runs", z.runs},
                           {"present", z.present},
                           {"present_fraction", z.present_fraction},
                           {"range_union", detail::range_json(z.range_union)},
                           {"range_intersection", detail::range_json(z.range_intersection)}});
  return Json{{"scales", r.scales}, {"cells", std::move(cells)}, {"summary", std::move(summary)}};
}

inline Json to_json(const CollapseReport& c) {
  Json scales = Json::array();
  for (const auto& s : c.scales)
    scales.push_back(Json{{"scale", s.scale}, {"dispersion", s.dispersion}, {"windows", s.rescaled.size()}});
  return Json{{"scales", std::move(scales)}, {"discrepancy", c.discrepancy}, {"score", c.score}};
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Two-column gnuplot data with a comment header.
inline std::string dat_xy(const std::string& header,
                          const std::vector<std::pair<double, double>>& rows) {
  std::string out = "# " + header + "\n";
  for (const auto& [x, y] : rows) out += detail::num(x) + " " + detail::num(y) + "\n";
  return out;
}

// One r-bin's histogram as (Z bin centre, mass) rows.
inline std::string dat_rbin(const ConditionalDistribution& cond, std::size_t bin) {
  const auto& rb = cond.bins.at(bin);
  const auto centers = cond.z_centers();
  std::string out = "# scale " + std::to_string(cond.scale) + " r in [" + detail::num(rb.lower) +
                    ", " + detail::num(rb.upper) + "] count " + std::to_string(rb.count) + "\n";
  out += cond.coordinate == ZCoordinate::kRatio ? "# Z/r mass\n" : "# Z mass\n";
  for (std::size_t k = 0; k < centers.size(); ++k)
    out += detail::num(centers[k]) + " " + detail::num(rb.mass[k]) + "\n";
  return out;
}

// Phase-diagram table: fraction of seeds present per (zeta, scale).
inline std::string phase_table_csv(const SweepResult& r) {
  std::string out = "zeta,scale,present_fraction\n";
  for (const auto& z : r.summary)
    for (std::size_t k = 0; k < r.scales.size(); ++k)
      out += detail::num(z.zeta) + "," + std::to_string(r.scales[k]) + "," +
             detail::num(z.per_scale_fraction[k]) + "\n";
  return out;
}

inline std::string series_csv(const TickSeries& s) {
  std::string out = "timestamp,value\n";
  for (const auto& p : s.points()) out += format_minute(p.time) + "," + detail::num(p.value) + "\n";
  return out;
}

// Single "increment" column, readable by load_increments_csv.
inline std::string increments_csv(const IncrementSeries& inc) {
  std::string out = "increment\n";
  for (double v : inc.signed_values) out += detail::num(v) + "\n";
  return out;
}

}  // namespace twophase

#endif  // TWOPHASE_JSON_IO_HPP_
