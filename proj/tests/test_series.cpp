#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <numeric>

#include "fixtures.hpp"
#include "twophase/series.hpp"

using namespace twophase;
using namespace std::chrono;
using fixtures::TempDir;

namespace {

Date ymd(int y, unsigned m, unsigned d) { return Date{year{y} / month{m} / day{d}}; }

const SessionCalendar& hk() {
  static const SessionCalendar cal = SessionCalendar::hk_1994_1997();
  return cal;
}

TickSeries series_of(const std::vector<double>& values) {
  const auto minutes = fixtures::session_minutes(hk(), values.size());
  std::vector<TickPoint> pts;
  for (std::size_t k = 0; k < values.size(); ++k) pts.push_back({minutes[k], values[k]});
  return TickSeries(pts, hk());
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Timestamps, ParseAndFormat) {
  const auto t = parse_minute("1995-03-01T10:07");
  ASSERT_TRUE(t);
  EXPECT_EQ(format_minute(*t), "1995-03-01T10:07");
  EXPECT_EQ(t->minute_of_day(), 10 * 60 + 7);
  EXPECT_EQ(t->date(), ymd(1995, 3, 1));
  EXPECT_EQ(*parse_minute("1995-03-01 10:07"), *t);
  EXPECT_EQ(*parse_minute("1995-03-01T10:07:00"), *t);
  EXPECT_FALSE(parse_minute("1995-03-01T25:00"));
  EXPECT_FALSE(parse_minute("1995-02-30T10:00"));
  EXPECT_FALSE(parse_minute("yesterday"));
}

TEST(Calendar, HongKongPresetClosingRegimes) {
  const auto& cal = hk();
  const auto close_on = [&](Date d) {
    int close = -1;
    for (const auto& s : cal.sessions())
      if (s.date == d) close = s.close;
    return close;
  };
  EXPECT_EQ(close_on(ymd(1994, 7, 1)), 15 * 60 + 45);
  EXPECT_EQ(close_on(ymd(1995, 8, 30)), 15 * 60 + 45);
  EXPECT_EQ(close_on(ymd(1995, 9, 1)), 15 * 60 + 55);
  EXPECT_EQ(close_on(ymd(1996, 12, 30)), 15 * 60 + 55);
  EXPECT_EQ(close_on(ymd(1997, 1, 2)), 16 * 60);
  EXPECT_EQ(close_on(ymd(1997, 5, 28)), 16 * 60);
  EXPECT_FALSE(cal.covers(ymd(1997, 5, 29)));
  EXPECT_FALSE(cal.covers(ymd(1994, 6, 30)));
  EXPECT_FALSE(cal.covers(ymd(1995, 3, 4)));  // Saturday

  // Lunch break and after-close minutes are outside every session.
  EXPECT_TRUE(cal.session_of(Minute::at(ymd(1995, 3, 1), 12 * 60 + 30)));
  EXPECT_FALSE(cal.session_of(Minute::at(ymd(1995, 3, 1), 12 * 60 + 31)));
  EXPECT_FALSE(cal.session_of(Minute::at(ymd(1995, 3, 1), 14 * 60 + 29)));
  EXPECT_TRUE(cal.session_of(Minute::at(ymd(1995, 3, 1), 15 * 60 + 45)));
  EXPECT_FALSE(cal.session_of(Minute::at(ymd(1995, 3, 1), 15 * 60 + 46)));
}

TEST(Calendar, TablesFromCsvAndJson) {
  TempDir dir("cal");
  const auto csv = fixtures::write_file(dir / "cal.csv",
                                        "date,open,close\n"
                                        "2001-02-05,09:30,12:00\n"
                                        "2001-02-05,13:00,16:00\n");
  const auto a = SessionCalendar::load(csv.string());
  ASSERT_EQ(a.sessions().size(), 2u);
  EXPECT_EQ(a.sessions()[1].open, 13 * 60);

  const auto json = fixtures::write_file(
      dir / "cal.json", R"({"sessions": [{"date": "2001-02-05", "open": "09:30", "close": "16:00"}]})");
  const auto b = SessionCalendar::load(json.string());
  ASSERT_EQ(b.sessions().size(), 1u);
  EXPECT_EQ(b.sessions()[0].close, 16 * 60);

  const auto preset = fixtures::write_file(dir / "p.json", R"({"preset": "hk-1994-1997"})");
  EXPECT_EQ(SessionCalendar::load(preset.string()).sessions().size(), hk().sessions().size());

  EXPECT_THROW(SessionCalendar::preset("nyse"), InputError);
  EXPECT_THROW(SessionCalendar({{ymd(2001, 2, 5), 600, 700}, {ymd(2001, 2, 5), 650, 800}}), InputError);
}

TEST(LoadCsv, MinimalWellFormedFile) {
  TempDir dir("load");
  const auto p = fixtures::write_file(dir / "s.csv",
                                      "timestamp,value\n"
                                      "1995-03-01T10:00,100\n"
                                      "1995-03-01T10:01,101\n"
                                      "1995-03-01T10:02,100\n");
  const auto s = load_csv(p, hk());
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[1].value, 101.0);
}

TEST(LoadCsv, RowsAreSortedByTime) {
  TempDir dir("sort");
  const auto p = fixtures::write_file(dir / "s.csv",
                                      "timestamp,value\n"
                                      "1995-03-01T10:02,102\n"
                                      "1995-03-01T10:00,100\n"
                                      "1995-03-01T10:01,101\n");
  const auto s = load_csv(p, hk());
  EXPECT_EQ(s[0].value, 100.0);
  EXPECT_EQ(s[2].value, 102.0);
}

TEST(LoadCsv, DuplicateTimestampNamesTheLine) {
  TempDir dir("dup");
  const auto p = fixtures::write_file(dir / "s.csv",
                                      "timestamp,value\n"
                                      "1995-03-01T10:00,100\n"
                                      "1995-03-01T10:01,101\n"
                                      "1995-03-01T10:01,102\n");
  const auto msg = error_of([&] { load_csv(p, hk()); });
  EXPECT_NE(msg.find(":4:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
}

TEST(LoadCsv, ValidationErrorsCarryLineNumbers) {
  TempDir dir("bad");
  const auto check = [&](const std::string& body, const std::string& needle) {
    const auto p = fixtures::write_file(dir / "s.csv", "timestamp,value\n1995-03-01T10:00,100\n" + body);
    const auto msg = error_of([&] { load_csv(p, hk()); });
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find(needle), std::string::npos) << msg;
  };
  check("1995-03-01T10:01;101\n", "malformed");
  check("1995-03-01T10:01,abc\n", "malformed value");
  check("1995-03-01T10:01,0\n", "non-positive");
  check("1995-03-01T10:01,-5\n", "non-positive");
  check("1995-03-01T13:00,101\n", "outside calendar");  // lunch break
  check("1995-03-04T10:00,101\n", "outside calendar");  // Saturday
  EXPECT_THROW(load_csv(dir / "missing.csv", hk()), InputError);
  const auto nohead = fixtures::write_file(dir / "h.csv", "1995-03-01T10:00,100\n");
  EXPECT_THROW(load_csv(nohead, hk()), InputError);
}

TEST(LoadCsv, SegmentSixSizedFixture) {
  TempDir dir("big");
  const auto p = fixtures::write_file(dir / "s.csv",
                                      fixtures::tick_csv(fixtures::session_minutes(hk(), 24442), 6));
  EXPECT_EQ(load_csv(p, hk()).size(), 24442u);
}

TEST(Segments, NoBoundariesGiveTheWholeSeries) {
  const auto s = series_of({100, 101, 102, 103});
  const auto segs = segment_by_calendar(s, {});
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].begin, 0u);
  EXPECT_EQ(segs[0].end, 4u);
  EXPECT_EQ(segs[0].label, "1");
}

TEST(Segments, MidpointBoundaryConservesPoints) {
  // Two trading days of 50 points each.
  std::vector<TickPoint> pts;
  for (int k = 0; k < 50; ++k) pts.push_back({Minute::at(ymd(1995, 3, 1), 600 + k), 100.0 + k});
  for (int k = 0; k < 50; ++k) pts.push_back({Minute::at(ymd(1995, 3, 2), 600 + k), 200.0 + k});
  const TickSeries s(pts, hk());
  const std::vector<Date> b{ymd(1995, 3, 2)};
  const auto segs = segment_by_calendar(s, b);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].size() + segs[1].size(), 100u);
  EXPECT_EQ(segs[0].size(), 50u);
  EXPECT_EQ(segs[1].label, "2");
}

TEST(Segments, SixHalfYearSegmentsBuiltToPublishedSizes) {
  // Half-year segments filled from their first session until the target size.
  const std::vector<std::size_t> sizes{27000, 28000, 29889, 28955, 27500, 24442};
  const std::vector<Date> bounds{ymd(1995, 1, 1), ymd(1995, 7, 1), ymd(1996, 1, 1),
                                 ymd(1996, 7, 1), ymd(1997, 1, 1)};
  std::vector<TickPoint> pts;
  std::size_t seg = 0, in_seg = 0;
  for (const auto& session : hk().sessions()) {
    while (seg < bounds.size() && session.date >= bounds[seg]) {
      ++seg;
      in_seg = 0;
    }
    for (int m = session.open; m <= session.close && in_seg < sizes[seg]; ++m, ++in_seg)
      pts.push_back({Minute::at(session.date, m), 1000.0 + static_cast<double>(pts.size() % 17)});
  }
  const TickSeries s(pts, hk());
  const auto segs = segment_by_calendar(s, bounds);
  ASSERT_EQ(segs.size(), 6u);
  std::vector<std::size_t> got;
  for (const auto& g : segs) got.push_back(g.size());
  EXPECT_EQ(got, sizes);
  EXPECT_EQ(*std::max_element(got.begin(), got.end()), 29889u);
  EXPECT_EQ(*std::min_element(got.begin(), got.end()), 24442u);
}

TEST(Segments, BoundaryOutsideSpanIsRejected) {
  const auto s = series_of({100, 101, 102});
  const std::vector<Date> before{ymd(1990, 1, 1)};
  const std::vector<Date> after{ymd(1999, 1, 1)};
  EXPECT_THROW(segment_by_calendar(s, before), InputError);
  EXPECT_THROW(segment_by_calendar(s, after), InputError);
}

TEST(Segments, PartitionReproducesParent) {
  const auto minutes = fixtures::session_minutes(hk(), 3000);
  std::vector<TickPoint> pts;
  for (std::size_t k = 0; k < minutes.size(); ++k) pts.push_back({minutes[k], 500.0 + static_cast<double>(k % 29)});
  const TickSeries s(pts, hk());
  const Date first = s[0].time.date();
  const Date last = s[s.size() - 1].time.date();
  for (int cut = 1; cut <= 3; ++cut) {
    std::vector<Date> b;
    for (int k = 1; k <= cut; ++k) b.push_back(first + days{(last - first).count() * k / (cut + 1) + 1});
    const auto segs = segment_by_calendar(s, b);
    std::vector<TickPoint> joined;
    for (const auto& g : segs) {
      const auto p = g.points();
      joined.insert(joined.end(), p.begin(), p.end());
    }
    ASSERT_EQ(joined.size(), s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      EXPECT_EQ(joined[k].time, s[k].time);
      EXPECT_EQ(joined[k].value, s[k].value);
    }
    for (std::size_t k = 1; k < segs.size(); ++k) EXPECT_EQ(segs[k - 1].end, segs[k].begin);
  }
}

TEST(Increments, HandComputedValues) {
  const auto s = series_of({100, 101, 99});
  const auto inc = increments(Segment::whole(s), true);
  EXPECT_EQ(inc.signed_values, (std::vector<double>{1, -2}));
  EXPECT_EQ(inc.absolute, (std::vector<double>{1, 2}));
}

TEST(Increments, ConstantAndMonotoneSeries) {
  const auto flat = increments(Segment::whole(series_of({7, 7, 7, 7, 7})), true);
  EXPECT_TRUE(std::all_of(flat.absolute.begin(), flat.absolute.end(), [](double x) { return x == 0; }));
  const auto up = increments(Segment::whole(series_of({1, 2, 4, 8, 16})), true);
  EXPECT_TRUE(std::all_of(up.signed_values.begin(), up.signed_values.end(), [](double x) { return x > 0; }));
  EXPECT_EQ(up.size(), 4u);
}

TEST(Increments, TooShortSegment) {
  const auto s = series_of({100, 101});
  Segment one{&s, 0, 1, "x"};
  EXPECT_THROW(increments(one, true), InputError);
}

TEST(Increments, SessionCrossingsAndGapsAreFlaggedNotAltered) {
  std::vector<TickPoint> pts{
      {Minute::at(ymd(1995, 3, 1), 12 * 60 + 29), 100},
      {Minute::at(ymd(1995, 3, 1), 12 * 60 + 30), 103},
      {Minute::at(ymd(1995, 3, 1), 14 * 60 + 30), 90},   // lunch crossing
      {Minute::at(ymd(1995, 3, 1), 14 * 60 + 31), 92},
      {Minute::at(ymd(1995, 3, 1), 14 * 60 + 34), 95},   // 3-minute gap
      {Minute::at(ymd(1995, 3, 1), 14 * 60 + 35), 94},
      {Minute::at(ymd(1995, 3, 2), 10 * 60), 99},        // overnight
  };
  const TickSeries s(pts, hk());
  const auto strict = increments(Segment::whole(s), false);
  const auto naive = increments(Segment::whole(s), true);
  EXPECT_EQ(strict.crossing, (std::vector<std::uint8_t>{0, 1, 0, 1, 0, 1}));
  EXPECT_EQ(strict.signed_values, naive.signed_values);
  EXPECT_EQ(strict.usable_count(), 3u);
  EXPECT_EQ(naive.usable_count(), 6u);
  EXPECT_EQ(strict.usable_absolute(), (std::vector<double>{3, 2, 1}));
}

TEST(Increments, AbsoluteMatchesIndependentRecomputation) {
  TempDir dir("abs");
  const auto p = fixtures::write_file(dir / "s.csv", fixtures::tick_csv(fixtures::session_minutes(hk(), 5000), 11));
  const auto s = load_csv(p, hk());
  const auto inc = increments(Segment::whole(s), false);
  ASSERT_EQ(inc.size(), s.size() - 1);
  for (std::size_t k = 0; k < inc.size(); ++k) {
    EXPECT_EQ(inc.absolute[k], std::abs(s[k + 1].value - s[k].value));
    EXPECT_EQ(inc.absolute[k], std::abs(inc.signed_values[k]));
    EXPECT_GE(inc.absolute[k], 0.0);
  }
}

TEST(IncrementFile, ReadsSingleColumn) {
  TempDir dir("incf");
  const auto p = fixtures::write_file(dir / "i.csv", "increment\n1.5\n-2\n0\n");
  const auto inc = load_increments_csv(p);
  EXPECT_EQ(inc.signed_values, (std::vector<double>{1.5, -2, 0}));
  EXPECT_EQ(inc.absolute, (std::vector<double>{1.5, 2, 0}));
  const auto bad = fixtures::write_file(dir / "b.csv", "increment\n1\nx\n");
  const auto msg = error_of([&] { load_increments_csv(bad); });
  EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
}
