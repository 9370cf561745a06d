#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "phonesense/execution.hpp"
#include "phonesense/session.hpp"

namespace phonesense {

inline constexpr std::size_t kSegmentLength = 20;

/// Trailing moving-average window in seconds; 0 disables smoothing.
struct SmoothingSpec {
  int window_s = 0;

  static constexpr std::array<int, 7> kGrid{0, 5, 10, 15, 20, 25, 30};

  /// Validates against kGrid unless allow_custom is set (then any value >= 0).
  static SmoothingSpec checked(int window_s, bool allow_custom = false);

  friend bool operator==(SmoothingSpec, SmoothingSpec) = default;
};

using Segment = std::array<double, kSegmentLength>;

/// One 40 s analysis window: segment_a precedes the anchor, segment_b starts
/// at it. For the phone group segment_b is the first 20 s of phone use.
struct WindowSample {
  std::string participant_id;
  int gender = 0;
  int label = 0;
  std::array<Segment, kChannelCount> segment_a{};
  std::array<Segment, kChannelCount> segment_b{};
  double anchor_s = 0.0;
  SmoothingSpec smoothing;
};

/// out[t] = mean(in[max(0, t-N+1) .. t]). A window touching a missing sample
/// yields a missing output.
SignalSeries smooth(const SignalSeries& series, SmoothingSpec spec);

Session smooth_session(const Session& session, SmoothingSpec spec);

/// Slices [anchor-20, anchor) and [anchor, anchor+20) from an already
/// smoothed session. The anchor is truncated to a whole second.
WindowSample extract_window(const Session& smoothed, double anchor_s, SmoothingSpec spec);

/// Smooths the full session, selects both anchors and extracts both windows.
std::vector<WindowSample> extract_samples(const Session& session, SmoothingSpec spec,
                                          const WindowPolicy& policy);

/// Per-session extraction over a whole dataset, in session order.
std::vector<WindowSample> build_windows(std::span<const Session> sessions, SmoothingSpec spec,
                                        const WindowPolicy& policy,
                                        Execution exec = Execution::parallel);

/// Debug dump, one row per channel-segment:
/// participant_id,label,anchor_s,channel,segment,v0..v19
void write_window_dump(std::span<const WindowSample> samples, const std::filesystem::path& file);

}  // namespace phonesense
