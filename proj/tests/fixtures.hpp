#ifndef TWOPHASE_TESTS_FIXTURES_HPP_
#define TWOPHASE_TESTS_FIXTURES_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "twophase/series.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("twophase_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline fs::path write_file(const fs::path& p, const std::string& content) {
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Consecutive session minutes of a calendar, starting at its first session.
inline std::vector<twophase::Minute> session_minutes(const twophase::SessionCalendar& cal,
                                                     std::size_t count) {
  std::vector<twophase::Minute> out;
  for (const auto& s : cal.sessions())
    for (int m = s.open; m <= s.close && out.size() < count; ++m)
      out.push_back(twophase::Minute::at(s.date, m));
  return out;
}

// Random-walk index values (positive) at the given minutes.
inline std::string tick_csv(const std::vector<twophase::Minute>& minutes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> step(-3, 3);
  std::string out = "timestamp,value\n";
  double y = 10000.0;
  for (const auto& t : minutes) {
    out += twophase::format_minute(t) + "," + std::to_string(static_cast<int>(y)) + "\n";
    y += step(rng);
  }
  return out;
}

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace fixtures

#endif  // TWOPHASE_TESTS_FIXTURES_HPP_
