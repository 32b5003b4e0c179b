#ifndef TWOPHASE_TOOLS_CLI_HPP_
#define TWOPHASE_TOOLS_CLI_HPP_

// The `twophase` command line: ingest, fit-tail, scan, simulate, sweep,
// collapse. Kept in a header so the tests can drive run() in-process.

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "twophase/conddist.hpp"
#include "twophase/error.hpp"
#include "twophase/json_io.hpp"
#include "twophase/series.hpp"
#include "twophase/surrogate.hpp"
#include "twophase/tailfit.hpp"
#include "twophase/windows.hpp"

namespace twophase::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "1.0.0";

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::ostringstream hex;
  for (unsigned int k = 0; k < len; ++k)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return hex.str();
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open input file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Output directory built under `<out>.partial` and renamed into place once the
// manifest is written, so a failed run leaves nothing behind at `<out>`.
class Stage {
 public:
  Stage(fs::path out, bool force) : out_(std::move(out)), force_(force) {
    if (out_.empty()) throw InputError("--out is required");
    if (fs::exists(out_) && !force_)
      throw InputError("output directory already exists: " + out_.string() + " (use --force)");
    tmp_ = out_;
    tmp_ += ".partial";
    fs::remove_all(tmp_);
    fs::create_directories(tmp_);
  }
  Stage(const Stage&) = delete;
  Stage& operator=(const Stage&) = delete;
  ~Stage() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  void write(const std::string& rel, const std::string& content) {
    const fs::path p = tmp_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("cannot write " + p.string());
    files_[rel] = sha256_hex(content);
  }

  void commit(Json manifest) {
    Json outputs = Json::array();
    for (const auto& [rel, digest] : files_) outputs.push_back(Json{{"path", rel}, {"sha256", digest}});
    manifest["outputs"] = std::move(outputs);
    const fs::path p = tmp_ / "manifest.json";
    std::ofstream(p, std::ios::binary) << dump(manifest);
    if (fs::exists(out_)) fs::remove_all(out_);
    fs::rename(tmp_, out_);
    committed_ = true;
  }

 private:
  fs::path out_, tmp_;
  bool force_ = false;
  bool committed_ = false;
  std::map<std::string, std::string> files_;  // sorted, so the manifest order is stable
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::size_t parse_size(const std::string& s, const char* what) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || v < 0) throw InputError(std::string("bad ") + what + " '" + s + "'");
  return static_cast<std::size_t>(v);
}

inline double parse_double(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw InputError(std::string("bad ") + what + " '" + s + "'");
  return v;
}

// "MIN:MAX:COUNT", or an explicit comma list.
inline std::vector<std::size_t> parse_scales(const std::string& s) {
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
      if (c == ':') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(cur);
    if (parts.size() != 3) throw InputError("--scales expects MIN:MAX:COUNT, got '" + s + "'");
    return scale_grid(parse_size(parts[0], "scale"), parse_size(parts[1], "scale"),
                      parse_size(parts[2], "scale count"));
  }
  std::vector<std::size_t> out;
  for (const auto& t : split_list(s)) out.push_back(parse_size(t, "scale"));
  if (out.empty()) throw InputError("empty scale list");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.front() < 2) throw InputError("scales must be >= 2");
  return out;
}

struct Options {
  std::string out;
  bool force = false;
  unsigned jobs = 1;
  std::string config;

  std::string input;
  std::string calendar = "hk-1994-1997";
  std::string boundaries;
  std::string segment = "1";
  bool cross_sessions = false;

  std::string scales = "2:30:29";
  DetectorParams detector;
  std::string r_binning = "quantile";
  std::string z_coordinate = "ratio";

  TailConfig tail;
  std::string ls_weighting = "counts";

  std::string zeta = "1.5";
  double imin = 7.0;
  std::size_t n = 25000;
  std::uint64_t seed = 1;
  std::string seeds = "1,2,3,4,5,6,7,8,9,10";
  std::string zetas = "0.5,0.8,1.2,1.5,1.8,2.1,2.44,3.0";
  std::string collapse_scales = "5,10,20,50";
};

struct Loaded {
  IncrementSeries incs;
  Json input_json;  // manifest "inputs" entries
  Json source;      // how the increments were obtained
};

inline Json digest_entry(const fs::path& p) {
  const auto bytes = read_file(p);
  return Json{{"path", p.string()}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}};
}

inline std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot open input file: " + p.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline std::vector<Date> parse_boundaries(const std::string& s) {
  std::vector<Date> out;
  for (const auto& t : split_list(s)) {
    const auto d = parse_date(t);
    if (!d) throw InputError("bad boundary date '" + t + "'");
    out.push_back(*d);
  }
  return out;
}

inline double single_zeta(const Options& o) {
  const auto z = split_list(o.zeta);
  if (z.size() != 1) throw InputError("this command takes a single --zeta");
  return parse_double(z[0], "zeta");
}

// Increments from --input (tick CSV or increment CSV) or, without --input,
// from the surrogate generator.
inline Loaded load_increments(const Options& o) {
  Loaded out;
  out.input_json = Json::array();
  if (o.input.empty()) {
    const SurrogateSpec spec{single_zeta(o), o.imin, o.n, o.seed};
    out.incs = surrogate_increments(spec);
    out.source = Json{{"kind", "surrogate"}, {"spec", to_json(spec)}};
    return out;
  }
  const fs::path path(o.input);
  out.input_json.push_back(digest_entry(path));
  const std::string header = first_line(path);
  if (header == "increment") {
    out.incs = load_increments_csv(path);
    out.source = Json{{"kind", "increments"}, {"path", o.input}};
    return out;
  }
  const auto cal = SessionCalendar::load(o.calendar);
  if (fs::exists(o.calendar)) out.input_json.push_back(digest_entry(o.calendar));
  const auto series = load_csv(path, cal);
  const auto bounds = parse_boundaries(o.boundaries);
  const auto segments = segment_by_calendar(series, bounds);
  const auto it = std::find_if(segments.begin(), segments.end(),
                               [&](const Segment& s) { return s.label == o.segment; });
  if (it == segments.end())
    throw InputError("no segment '" + o.segment + "' (have 1.." + std::to_string(segments.size()) + ")");
  out.incs = increments(*it, o.cross_sessions);
  out.source = Json{{"kind", "series"},
                    {"path", o.input},
                    {"calendar", o.calendar},
                    {"segment", o.segment},
                    {"points", it->size()},
                    {"cross_sessions", o.cross_sessions}};
  return out;
}

inline void resolve(Options& o) {
  o.detector.r_binning = parse_rbinning(o.r_binning);
  o.detector.z_coordinate = parse_zcoordinate(o.z_coordinate);
  if (o.ls_weighting == "counts") o.tail.ls_weighting = LsWeighting::kCounts;
  else if (o.ls_weighting == "uniform") o.tail.ls_weighting = LsWeighting::kUniform;
  else throw InputError("unknown ls-weighting '" + o.ls_weighting + "' (expected counts or uniform)");
  o.detector.validate();
  o.tail.validate();
  if (o.jobs < 1) o.jobs = 1;
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

inline Json base_manifest(const std::string& command, Json params, Json inputs, const Options& o) {
  return Json{{"tool", "twophase"},
              {"version", kVersion},
              {"command", command},
              {"params", std::move(params)},
              {"inputs", std::move(inputs)},
              {"runtime", Json{{"jobs", o.jobs}, {"created_utc", utc_now()}}}};
}

inline std::string scale_dir(std::size_t scale) {
  std::ostringstream s;
  s << "cond/scale_" << std::setw(4) << std::setfill('0') << scale;
  return s.str();
}

inline void write_scan(Stage& stage, const PhaseScan& ps, const std::vector<ScaleDetail>& details) {
  Json reports = Json::array();
  for (const auto& d : details) {
    reports.push_back(to_json(d.report));
    for (std::size_t b = 0; b < d.cond.bins.size(); ++b) {
      std::ostringstream name;
      name << scale_dir(d.cond.scale) << "/rbin_" << std::setw(3) << std::setfill('0') << b << ".dat";
      stage.write(name.str(), dat_rbin(d.cond, b));
    }
  }
  Json j = to_json(ps);
  j["reports"] = std::move(reports);
  stage.write("scan.json", dump(j));
}

inline int cmd_ingest(const Options& o, std::ostream& log) {
  if (o.input.empty()) throw InputError("ingest needs --input");
  const auto cal = SessionCalendar::load(o.calendar);
  const auto series = load_csv(o.input, cal);
  const auto segments = segment_by_calendar(series, parse_boundaries(o.boundaries));
  Json inputs = Json::array({digest_entry(o.input)});
  if (fs::exists(o.calendar)) inputs.push_back(digest_entry(o.calendar));

  Stage stage(o.out, o.force);
  stage.write("series.csv", series_csv(series));
  Json segs = Json::array();
  for (const auto& s : segments) {
    const auto inc = increments(s, o.cross_sessions);
    std::size_t flagged = 0;
    for (auto c : inc.crossing) flagged += c;
    segs.push_back(Json{{"label", s.label},
                        {"begin", s.begin},
                        {"end", s.end},
                        {"points", s.size()},
                        {"first", format_minute(series[s.begin].time)},
                        {"last", format_minute(series[s.end - 1].time)},
                        {"flagged_increments", flagged}});
  }
  stage.write("segments.json", dump(Json{{"points", series.size()}, {"segments", segs}}));
  Json params{{"calendar", o.calendar}, {"boundaries", o.boundaries}, {"cross-sessions", o.cross_sessions}};
  stage.commit(base_manifest("ingest", std::move(params), std::move(inputs), o));
  log << "ingested " << series.size() << " points in " << segments.size() << " segment(s)\n";
  return 0;
}

inline int cmd_fit_tail(const Options& o, std::ostream& log) {
  auto loaded = load_increments(o);
  const auto samples = loaded.incs.usable_absolute();
  const auto fit = fit_tail(samples, o.tail, o.jobs);

  Stage stage(o.out, o.force);
  Json j = to_json(fit);
  stage.write("tailfit.json", dump(j));
  stage.write("ccdf.dat", dat_xy("x P(X>=x)", ccdf_points(samples)));
  std::vector<std::pair<double, double>> hist;
  for (const auto& b : log_histogram(samples, fit.i_min, o.tail.log_bin_ratio))
    if (b.count > 0) hist.emplace_back(std::sqrt(b.lower * b.upper), b.density);
  stage.write("loghist.dat", dat_xy("x density (tail, log-binned)", hist));
  Json params{{"source", loaded.source}, {"tail", to_json(o.tail)}};
  stage.commit(base_manifest("fit-tail", std::move(params), std::move(loaded.input_json), o));
  log << "zeta_avg " << fit.zeta_avg << " (ks " << fit.zeta_ks << ", ls " << fit.zeta_ls
      << ") i_min " << fit.i_min << " n_tail " << fit.n_tail << "\n";
  return 0;
}

inline void log_scan(const PhaseScan& ps, std::ostream& log) {
  if (ps.range) log << "bifurcation present over scales " << ps.range->first << ".." << ps.range->last << "\n";
  else log << "no bifurcation at any scanned scale\n";
}

inline int cmd_scan(const Options& o, std::ostream& log) {
  auto loaded = load_increments(o);
  const auto scales = parse_scales(o.scales);
  std::vector<ScaleDetail> details;
  const auto ps = scan(loaded.incs, scales, o.detector, o.jobs, &details);

  Stage stage(o.out, o.force);
  write_scan(stage, ps, details);
  Json params{{"source", loaded.source}, {"scales", scales}, {"detector", to_json(o.detector)}};
  stage.commit(base_manifest("scan", std::move(params), std::move(loaded.input_json), o));
  log_scan(ps, log);
  return 0;
}

inline int cmd_simulate(const Options& o, std::ostream& log) {
  const SurrogateSpec spec{single_zeta(o), o.imin, o.n, o.seed};
  const auto scales = parse_scales(o.scales);
  const auto incs = surrogate_increments(spec);
  std::vector<ScaleDetail> details;
  const auto ps = scan(incs, scales, o.detector, o.jobs, &details);

  Stage stage(o.out, o.force);
  stage.write("increments.csv", increments_csv(incs));
  write_scan(stage, ps, details);
  Json params{{"spec", to_json(spec)}, {"scales", scales}, {"detector", to_json(o.detector)}};
  stage.commit(base_manifest("simulate", std::move(params), Json::array(), o));
  log_scan(ps, log);
  return 0;
}

inline int cmd_sweep(const Options& o, std::ostream& log) {
  std::vector<double> zetas;
  for (const auto& t : split_list(o.zetas)) zetas.push_back(parse_double(t, "zeta"));
  std::vector<std::uint64_t> seeds;
  for (const auto& t : split_list(o.seeds)) seeds.push_back(parse_size(t, "seed"));
  const auto scales = parse_scales(o.scales);
  const SurrogateSpec base{zetas.empty() ? 1.0 : zetas.front(), o.imin, o.n, 0};
  const auto result = sweep(zetas, seeds, base, scales, o.detector, o.jobs);

  Stage stage(o.out, o.force);
  stage.write("sweep.json", dump(to_json(result)));
  stage.write("phase_table.csv", phase_table_csv(result));
  Json params{{"zetas", zetas}, {"seeds", seeds}, {"imin", o.imin}, {"n", o.n},
              {"scales", scales}, {"detector", to_json(o.detector)}};
  stage.commit(base_manifest("sweep", std::move(params), Json::array(), o));
  for (const auto& z : result.summary)
    log << "zeta " << z.zeta << ": present in " << z.present << "/" << z.runs << " seeds\n";
  return 0;
}

inline int cmd_collapse(const Options& o, std::ostream& log) {
  auto loaded = load_increments(o);
  const auto scales = parse_scales(o.collapse_scales);
  const auto report = collapse(loaded.incs, scales);

  Stage stage(o.out, o.force);
  stage.write("collapse.json", dump(to_json(report)));
  for (const auto& s : report.scales) {
    std::ostringstream name;
    name << "collapse/scale_" << std::setw(4) << std::setfill('0') << s.scale << ".dat";
    stage.write(name.str(), dat_xy("Z/s s*p(Z), s = " + std::to_string(s.dispersion), s.pdf));
  }
  Json params{{"source", loaded.source}, {"scales", scales}};
  stage.commit(base_manifest("collapse", std::move(params), std::move(loaded.input_json), o));
  log << "collapse score " << report.score << "\n";
  return 0;
}

// Flags shared by config-file keys: the key is the long flag name.
inline void add_common(CLI::App* c, Options& o) {
  c->add_option("--out", o.out, "Output directory (one per run)")->required();
  c->add_flag("--force", o.force, "Replace an existing output directory");
  c->add_option("--jobs", o.jobs, "Worker threads; results do not depend on it");
  c->add_option("--config", o.config, "JSON file of flag defaults; explicit flags win");
}

inline void add_input(CLI::App* c, Options& o) {
  c->add_option("--input", o.input, "Tick CSV (timestamp,value) or increment CSV (increment)");
  c->add_option("--calendar", o.calendar, "Preset name or session table (.json/.csv)");
  c->add_option("--boundaries", o.boundaries, "Comma-separated segment start dates");
  c->add_option("--segment", o.segment, "Segment label to analyse");
  c->add_flag("--cross-sessions", o.cross_sessions, "Keep increments spanning session gaps");
}

inline void add_surrogate(CLI::App* c, Options& o) {
  c->add_option("--zeta", o.zeta, "CCDF tail exponent (comma list for sweep)");
  c->add_option("--imin", o.imin, "Lower bound of the absolute increments");
  c->add_option("--n", o.n, "Number of increments");
  c->add_option("--seed", o.seed, "RNG seed");
}

inline void add_detector(CLI::App* c, Options& o) {
  auto& d = o.detector;
  c->add_option("--scales", o.scales, "MIN:MAX:COUNT or comma list");
  c->add_option("--r-bins", d.r_bins, "Number of r-bins");
  c->add_option("--r-binning", o.r_binning, "quantile or fixed");
  c->add_option("--z-coordinate", o.z_coordinate, "ratio (Z/r) or raw (Z)");
  c->add_option("--z-bins", d.z_bins, "Histogram bins in the ratio coordinate");
  c->add_option("--smoothing", d.smoothing, "Binomial smoothing passes");
  c->add_option("--prominence", d.prominence, "Minimum peak prominence relative to the maximum");
  c->add_option("--broad-width", d.broad_width, "FWHM fraction above which a single mode is broad");
  c->add_option("--persist", d.persist, "Bimodal bins required above the last unimodal bin");
  c->add_option("--min-samples", d.min_samples, "Windows needed for a bin to be classified");
  c->add_option("--unimodal-majority", d.unimodal_majority, "Require unimodal bins to outnumber bimodal ones");
  c->add_option("--stride", d.stride, "Window stride");
}

inline void add_tail(CLI::App* c, Options& o) {
  c->add_option("--min-tail", o.tail.min_tail, "Minimum tail size");
  c->add_option("--max-candidates", o.tail.max_candidates, "Lower-bound candidates scanned");
  c->add_option("--log-bin-ratio", o.tail.log_bin_ratio, "Log-bin ratio for the LS estimate");
  c->add_option("--min-ls-bins", o.tail.min_ls_bins, "Occupied log-bins needed for LS");
  c->add_option("--ls-weighting", o.ls_weighting, "counts or uniform");
}

// Turns a JSON config object into flag tokens placed before the user's own
// flags; with TakeLast, anything given explicitly overrides them.
inline std::vector<std::string> config_tokens(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("config " + path.string() + " must be a JSON object");
  std::vector<std::string> out;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      out.push_back(flag + "=" + (value.get<bool>() ? "true" : "false"));
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ",";
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      out.push_back(flag + "=" + joined);
    } else if (value.is_string()) {
      out.push_back(flag + "=" + value.get<std::string>());
    } else {
      out.push_back(flag + "=" + value.dump());
    }
  }
  return out;
}

inline int run(int argc, const char* const* argv, std::ostream& log = std::cout,
               std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv, argv + argc);
  // --config is honoured before parsing: splice its tokens in right after the
  // subcommand name.
  for (std::size_t k = 2; k < args.size(); ++k) {
    std::string path;
    if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
    else if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
    if (path.empty()) continue;
    try {
      auto tokens = config_tokens(path);
      args.insert(args.begin() + 2, tokens.begin(), tokens.end());
    } catch (const InputError& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
    break;
  }

  Options o;
  CLI::App app{"Two-phase bifurcation analysis of minute-level index series"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  const auto sub = [&](const char* name, const char* desc) {
    auto* c = app.add_subcommand(name, desc);
    c->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    return c;
  };
  auto* ingest = sub("ingest", "Validate and segment a tick CSV");
  auto* fit = sub("fit-tail", "Power-law fit of absolute increments");
  auto* scn = sub("scan", "Bifurcation scan over scales");
  auto* sim = sub("simulate", "Scan a power-law surrogate");
  auto* swp = sub("sweep", "Surrogate scans over exponents and seeds");
  auto* col = sub("collapse", "Rescaled-distribution collapse across scales");

  for (auto* c : {ingest, fit, scn, sim, swp, col}) add_common(c, o);
  for (auto* c : {ingest, fit, scn, col}) add_input(c, o);
  for (auto* c : {fit, scn, sim, col}) add_surrogate(c, o);
  for (auto* c : {scn, sim, swp}) add_detector(c, o);
  add_tail(fit, o);
  col->add_option("--scales", o.collapse_scales, "MIN:MAX:COUNT or comma list");
  swp->add_option("--zeta", o.zetas, "Comma list of CCDF tail exponents");
  swp->add_option("--seeds", o.seeds, "Comma list of seeds");
  swp->add_option("--imin", o.imin, "Lower bound of the absolute increments");
  swp->add_option("--n", o.n, "Number of increments");

  std::vector<const char*> cargv;
  for (const auto& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, err);
    return code == 0 ? 0 : 2;
  }

  try {
    resolve(o);
    if (ingest->parsed()) return cmd_ingest(o, log);
    if (fit->parsed()) return cmd_fit_tail(o, log);
    if (scn->parsed()) return cmd_scan(o, log);
    if (sim->parsed()) return cmd_simulate(o, log);
    if (swp->parsed()) return cmd_sweep(o, log);
    if (col->parsed()) return cmd_collapse(o, log);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return 2;
  } catch (const GuardError& e) {
    err << "statistical guard: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace twophase::cli

#endif  // TWOPHASE_TOOLS_CLI_HPP_
