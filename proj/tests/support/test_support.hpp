#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "phonesense/preprocess.hpp"
#include "phonesense/session.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("phonesense_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  std::ofstream(file, std::ios::binary) << text;
}

/// A 1 Hz session with smooth, distinct-valued channels rounded to 3 decimals.
inline phonesense::Session make_session(const std::string& id, phonesense::Group group, std::size_t duration,
                                        std::vector<phonesense::EventSpan> events, int gender = 0,
                                        unsigned seed = 1) {
  using namespace phonesense;
  Session s;
  s.participant_id = id;
  s.gender = gender;
  s.group = group;
  s.duration_s = static_cast<double>(duration);
  s.events = std::move(events);
  std::mt19937 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    auto& series = s.channels[c];
    series.channel = kAllChannels[c];
    series.values.resize(duration);
    series.missing.assign(duration, false);
    for (std::size_t t = 0; t < duration; ++t)
      series.values[t] =
          std::round((10.0 * static_cast<double>(c + 1) + std::sin(0.05 * static_cast<double>(t)) + noise(rng)) *
                     1000.0) /
          1000.0;
  }
  return s;
}

inline phonesense::EventSpan activity(double start, double end, const std::string& label) {
  return {start, end, phonesense::EventKind::activity, label};
}

inline phonesense::EventSpan phone(double start, double end, const std::string& label = "video2") {
  return {start, end, phonesense::EventKind::phone, label};
}

inline std::vector<double> random_segment(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> x(phonesense::kSegmentLength);
  for (auto& v : x) v = n(rng);
  return x;
}

}  // namespace testing_support
