#ifndef TWOPHASE_SERIES_HPP_
#define TWOPHASE_SERIES_HPP_

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "twophase/error.hpp"

namespace twophase {

using Date = std::chrono::sys_days;

// Calendar minute, counted from 1970-01-01T00:00.
struct Minute {
  std::int64_t value = 0;

  Date date() const {
    return Date{std::chrono::days{value >= 0 ? value / 1440 : (value - 1439) / 1440}};
  }
  int minute_of_day() const {
    return static_cast<int>(value - date().time_since_epoch().count() * 1440);
  }
  static Minute at(Date d, int minute_of_day) {
    return Minute{static_cast<std::int64_t>(d.time_since_epoch().count()) * 1440 +
                  minute_of_day};
  }
  friend auto operator<=>(const Minute&, const Minute&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::string two_digits(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

}  // namespace detail

// "YYYY-MM-DD"
inline std::optional<Date> parse_date(std::string_view s) {
  s = detail::trim(s);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_int(s.substr(5, 2), m) ||
      !detail::parse_int(s.substr(8, 2), d))
    return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

// "HH:MM" -> minute of day.
inline std::optional<int> parse_clock(std::string_view s) {
  s = detail::trim(s);
  if (s.size() != 5 || s[2] != ':') return std::nullopt;
  int h = 0, m = 0;
  if (!detail::parse_int(s.substr(0, 2), h) || !detail::parse_int(s.substr(3, 2), m))
    return std::nullopt;
  if (h < 0 || h > 23 || m < 0 || m > 59) return std::nullopt;
  return h * 60 + m;
}

// ISO-8601 to the minute: "YYYY-MM-DDTHH:MM" (a space may replace 'T'; a
// trailing ":00" seconds field is accepted).
inline std::optional<Minute> parse_minute(std::string_view s) {
  s = detail::trim(s);
  if (s.size() == 19 && s.substr(16) == ":00") s = s.substr(0, 16);
  if (s.size() != 16 || (s[10] != 'T' && s[10] != ' ')) return std::nullopt;
  const auto d = parse_date(s.substr(0, 10));
  const auto c = parse_clock(s.substr(11, 5));
  if (!d || !c) return std::nullopt;
  return Minute::at(*d, *c);
}

inline std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  return std::to_string(static_cast<int>(ymd.year())) + "-" +
         detail::two_digits(static_cast<int>(static_cast<unsigned>(ymd.month()))) + "-" +
         detail::two_digits(static_cast<int>(static_cast<unsigned>(ymd.day())));
}

inline std::string format_clock(int minute_of_day) {
  return detail::two_digits(minute_of_day / 60) + ":" + detail::two_digits(minute_of_day % 60);
}

inline std::string format_minute(Minute t) {
  return format_date(t.date()) + "T" + format_clock(t.minute_of_day());
}

// One trading session; open and close are inclusive minutes of the day.
struct Session {
  Date date;
  int open = 0;
  int close = 0;

  Minute first() const { return Minute::at(date, open); }
  Minute last() const { return Minute::at(date, close); }
};

class SessionCalendar {
 public:
  SessionCalendar() = default;

  explicit SessionCalendar(std::vector<Session> sessions) : sessions_(std::move(sessions)) {
    std::sort(sessions_.begin(), sessions_.end(), [](const Session& a, const Session& b) {
      return a.first() < b.first();
    });
    for (std::size_t k = 0; k < sessions_.size(); ++k) {
      const auto& s = sessions_[k];
      if (s.open < 0 || s.close >= 1440 || s.open > s.close)
        throw InputError("calendar: invalid session on " + format_date(s.date) + " (" +
                         format_clock(std::max(0, s.open)) + "-" +
                         format_clock(std::clamp(s.close, 0, 1439)) + ")");
      if (k > 0 && sessions_[k - 1].last() >= s.first())
        throw InputError("calendar: overlapping sessions on " + format_date(s.date));
    }
  }

  // Hong Kong schedule, 1994-07-01 .. 1997-05-28, every weekday: morning
  // 10:00-12:30, afternoon from 14:30 closing at 15:45 (to 1995-08-31), 15:55
  // (1995-09-01 .. 1996-12-31) and 16:00 (from 1997-01-01). Exchange holidays
  // are not modelled; a weekday without data simply has no records.
  static SessionCalendar hk_1994_1997() {
    using namespace std::chrono;
    const Date first{year{1994} / July / 1};
    const Date last{year{1997} / May / 28};
    const Date regime2{year{1995} / September / 1};
    const Date regime3{year{1997} / January / 1};
    std::vector<Session> sessions;
    for (Date d = first; d <= last; d += days{1}) {
      const weekday wd{d};
      if (wd == Saturday || wd == Sunday) continue;
      const int close = d < regime2 ? 15 * 60 + 45 : (d < regime3 ? 15 * 60 + 55 : 16 * 60);
      sessions.push_back({d, 10 * 60, 12 * 60 + 30});
      sessions.push_back({d, 14 * 60 + 30, close});
    }
    return SessionCalendar(std::move(sessions));
  }

  // CSV with header "date,open,close" (YYYY-MM-DD,HH:MM,HH:MM); several rows
  // per date describe several sessions.
  static SessionCalendar from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open calendar file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    std::vector<Session> sessions;
    while (std::getline(in, line)) {
      ++line_no;
      const auto row = detail::trim(line);
      if (row.empty()) continue;
      if (line_no == 1 && row.substr(0, 4) == "date") continue;
      const auto c1 = row.find(',');
      const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
      if (c2 == std::string_view::npos)
        throw InputError(path.string() + ":" + std::to_string(line_no) +
                         ": expected date,open,close");
      const auto d = parse_date(row.substr(0, c1));
      const auto o = parse_clock(row.substr(c1 + 1, c2 - c1 - 1));
      const auto c = parse_clock(row.substr(c2 + 1));
      if (!d || !o || !c)
        throw InputError(path.string() + ":" + std::to_string(line_no) +
                         ": malformed calendar row");
      sessions.push_back({*d, *o, *c});
    }
    return SessionCalendar(std::move(sessions));
  }

  // Either {"preset": "hk-1994-1997"} or {"sessions": [{"date", "open",
  // "close"}, ...]} (a bare array of session objects is also accepted).
  static SessionCalendar from_json(const nlohmann::json& j) {
    if (j.is_object() && j.contains("preset")) return preset(j.at("preset").get<std::string>());
    const auto& list = j.is_object() ? j.at("sessions") : j;
    if (!list.is_array()) throw InputError("calendar JSON: expected an array of sessions");
    std::vector<Session> sessions;
    for (const auto& item : list) {
      const auto d = parse_date(item.at("date").get<std::string>());
      const auto o = parse_clock(item.at("open").get<std::string>());
      const auto c = parse_clock(item.at("close").get<std::string>());
      if (!d || !o || !c) throw InputError("calendar JSON: malformed session " + item.dump());
      sessions.push_back({*d, *o, *c});
    }
    return SessionCalendar(std::move(sessions));
  }

  static SessionCalendar preset(std::string_view name) {
    if (name == "hk-1994-1997") return hk_1994_1997();
    throw InputError("unknown calendar preset: " + std::string(name));
  }

  // Preset name, .json file or .csv file.
  static SessionCalendar load(const std::string& spec) {
    if (spec == "hk-1994-1997") return hk_1994_1997();
    const std::filesystem::path path(spec);
    if (path.extension() == ".json") {
      std::ifstream in(path);
      if (!in) throw InputError("cannot open calendar file: " + spec);
      try {
        return from_json(nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& e) {
        throw InputError("calendar JSON " + spec + ": " + e.what());
      }
    }
    return from_csv(path);
  }

  // Index of the session containing t.
  std::optional<std::size_t> session_of(Minute t) const {
    auto it = std::upper_bound(sessions_.begin(), sessions_.end(), t,
                               [](Minute v, const Session& s) { return v < s.first(); });
    if (it == sessions_.begin()) return std::nullopt;
    --it;
    if (t > it->last()) return std::nullopt;
    return static_cast<std::size_t>(it - sessions_.begin());
  }

  bool covers(Date d) const {
    auto it = std::lower_bound(sessions_.begin(), sessions_.end(), d,
                               [](const Session& s, Date v) { return s.date < v; });
    return it != sessions_.end() && it->date == d;
  }

  std::span<const Session> sessions() const { return sessions_; }
  bool empty() const { return sessions_.empty(); }

 private:
  std::vector<Session> sessions_;
};

struct TickPoint {
  Minute time;
  double value = 0.0;
};

// Minute-resolution index series y(t). Immutable once constructed: points are
// sorted ascending, unique, positive, and each lies inside a calendar session.
class TickSeries {
 public:
  TickSeries(std::vector<TickPoint> points, SessionCalendar calendar, std::string source = {})
      : points_(std::move(points)), calendar_(std::move(calendar)), source_(std::move(source)) {
    std::stable_sort(points_.begin(), points_.end(),
                     [](const TickPoint& a, const TickPoint& b) { return a.time < b.time; });
    session_.reserve(points_.size());
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const auto& p = points_[k];
      if (!std::isfinite(p.value) || p.value <= 0.0)
        throw InputError("non-positive or non-finite value at " + format_minute(p.time));
      if (k > 0 && points_[k - 1].time == p.time)
        throw InputError("duplicate timestamp " + format_minute(p.time));
      const auto s = calendar_.session_of(p.time);
      if (!s) throw InputError("timestamp outside calendar: " + format_minute(p.time));
      session_.push_back(*s);
    }
  }

  std::span<const TickPoint> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const TickPoint& operator[](std::size_t k) const { return points_[k]; }
  std::size_t session_index(std::size_t k) const { return session_[k]; }
  const SessionCalendar& calendar() const { return calendar_; }
  const std::string& source() const { return source_; }

 private:
  std::vector<TickPoint> points_;
  std::vector<std::size_t> session_;
  SessionCalendar calendar_;
  std::string source_;
};

// Half-open index range [begin, end) of a parent series. Non-owning: the parent
// must outlive the segment.
struct Segment {
  const TickSeries* parent = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string label;

  std::size_t size() const { return end - begin; }
  std::span<const TickPoint> points() const { return parent->points().subspan(begin, size()); }

  static Segment whole(const TickSeries& s, std::string label = "1") {
    return {&s, 0, s.size(), std::move(label)};
  }
};

// i(t) = y(t+1) - y(t) and I(t) = |i(t)|, one entry per consecutive record
// pair. crossing[k] marks pairs in different sessions or more than one minute
// apart; with exclude_crossing set those entries are dropped from all
// downstream statistics (their values are kept).
struct IncrementSeries {
  std::vector<double> signed_values;
  std::vector<double> absolute;
  std::vector<std::uint8_t> crossing;
  bool exclude_crossing = true;

  std::size_t size() const { return signed_values.size(); }
  bool excluded(std::size_t k) const { return exclude_crossing && crossing[k] != 0; }

  std::size_t usable_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < size(); ++k) n += excluded(k) ? 0 : 1;
    return n;
  }

  std::vector<double> usable_absolute() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t k = 0; k < size(); ++k)
      if (!excluded(k)) out.push_back(absolute[k]);
    return out;
  }

  // Increments with no calendar (surrogates, raw increment files).
  static IncrementSeries from_signed(std::vector<double> values) {
    IncrementSeries out;
    out.absolute.reserve(values.size());
    for (double v : values) out.absolute.push_back(std::abs(v));
    out.crossing.assign(values.size(), 0);
    out.signed_values = std::move(values);
    return out;
  }
};

namespace detail {

struct ParsedRow {
  TickPoint point;
  std::size_t line = 0;
};

}  // namespace detail

// Reads "timestamp,value" rows. Errors name the file and line.
inline TickSeries load_csv(const std::filesystem::path& path, const SessionCalendar& calendar) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path.string());
  const std::string where = path.string() + ":";
  std::vector<detail::ParsedRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = detail::trim(line);
    if (row.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (row == "timestamp,value") continue;
      throw InputError(where + std::to_string(line_no) +
                       ": expected header 'timestamp,value'");
    }
    const auto comma = row.find(',');
    if (comma == std::string_view::npos)
      throw InputError(where + std::to_string(line_no) + ": malformed row (missing ',')");
    const auto t = parse_minute(row.substr(0, comma));
    if (!t)
      throw InputError(where + std::to_string(line_no) + ": malformed timestamp '" +
                       std::string(row.substr(0, comma)) + "'");
    const auto vtext = detail::trim(row.substr(comma + 1));
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(vtext.data(), vtext.data() + vtext.size(), value);
    if (ec != std::errc{} || ptr != vtext.data() + vtext.size())
      throw InputError(where + std::to_string(line_no) + ": malformed value '" +
                       std::string(vtext) + "'");
    if (!std::isfinite(value) || value <= 0.0)
      throw InputError(where + std::to_string(line_no) + ": non-positive value");
    if (!calendar.session_of(*t))
      throw InputError(where + std::to_string(line_no) + ": timestamp outside calendar " +
                       format_minute(*t));
    rows.push_back({{*t, value}, line_no});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.point.time < b.point.time;
  });
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (rows[k].point.time == rows[k - 1].point.time)
      throw InputError(where + std::to_string(std::max(rows[k].line, rows[k - 1].line)) +
                       ": duplicate timestamp " + format_minute(rows[k].point.time));
  std::vector<TickPoint> points;
  points.reserve(rows.size());
  for (const auto& r : rows) points.push_back(r.point);
  return TickSeries(std::move(points), calendar, path.string());
}

// Splits at each boundary date: a segment ends before the first point dated on
// or after its boundary. Labels are "1", "2", ...
inline std::vector<Segment> segment_by_calendar(const TickSeries& series,
                                                std::span<const Date> boundaries) {
  if (series.size() < 2) throw InputError("series has fewer than 2 points");
  if (!std::is_sorted(boundaries.begin(), boundaries.end()))
    throw InputError("segment boundaries must be sorted");
  const Date first = series[0].time.date();
  const Date last = series[series.size() - 1].time.date();
  std::vector<Segment> out;
  std::size_t begin = 0;
  for (const Date b : boundaries) {
    if (b <= first || b > last)
      throw InputError("segment boundary " + format_date(b) + " outside data span " +
                       format_date(first) + " .. " + format_date(last));
    const auto pts = series.points();
    const auto it = std::lower_bound(pts.begin() + static_cast<std::ptrdiff_t>(begin), pts.end(),
                                     Minute::at(b, 0),
                                     [](const TickPoint& p, Minute v) { return p.time < v; });
    const auto end = static_cast<std::size_t>(it - pts.begin());
    out.push_back({&series, begin, end, std::to_string(out.size() + 1)});
    begin = end;
  }
  out.push_back({&series, begin, series.size(), std::to_string(out.size() + 1)});
  for (const auto& s : out)
    if (s.size() < 2)
      throw InputError("segment " + s.label + " has fewer than 2 points");
  return out;
}

inline IncrementSeries increments(const Segment& segment, bool cross_sessions) {
  if (segment.parent == nullptr || segment.size() < 2)
    throw InputError("segment too short for increments (need at least 2 points)");
  const auto& series = *segment.parent;
  IncrementSeries out;
  const std::size_t n = segment.size() - 1;
  out.signed_values.reserve(n);
  out.absolute.reserve(n);
  out.crossing.reserve(n);
  out.exclude_crossing = !cross_sessions;
  for (std::size_t k = segment.begin; k + 1 < segment.end; ++k) {
    const double d = series[k + 1].value - series[k].value;
    out.signed_values.push_back(d);
    out.absolute.push_back(std::abs(d));
    const bool gap = series[k + 1].time.value - series[k].time.value > 1;
    const bool crosses = series.session_index(k + 1) != series.session_index(k);
    out.crossing.push_back(gap || crosses ? 1 : 0);
  }
  return out;
}

// Single-column "increment" file, as written by the simulate command.
inline IncrementSeries load_increments_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = detail::trim(line);
    if (row.empty() || (line_no == 1 && row == "increment")) continue;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(row.data(), row.data() + row.size(), v);
    if (ec != std::errc{} || ptr != row.data() + row.size() || !std::isfinite(v))
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": malformed increment");
    values.push_back(v);
  }
  return IncrementSeries::from_signed(std::move(values));
}

}  // namespace twophase

#endif  // TWOPHASE_SERIES_HPP_
