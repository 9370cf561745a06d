#include "phonesense/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "phonesense/error.hpp"
#include "text_io.hpp"

namespace phonesense {

SmoothingSpec SmoothingSpec::checked(int window_s, bool allow_custom) {
  if (window_s < 0)
    throw Error(ErrorCode::invalid_smoothing, "negative smoothing window " + std::to_string(window_s));
  if (!allow_custom && std::find(kGrid.begin(), kGrid.end(), window_s) == kGrid.end())
    throw Error(ErrorCode::invalid_smoothing,
                "smoothing window " + std::to_string(window_s) + " is not in {0,5,10,15,20,25,30}");
  return SmoothingSpec{window_s};
}

SignalSeries smooth(const SignalSeries& series, SmoothingSpec spec) {
  if (spec.window_s <= 1) return series;
  const auto n = series.size();
  const auto width = static_cast<std::size_t>(spec.window_s);

  SignalSeries out = series;
  // Each output is summed directly over its window so that the result does
  // not carry running-sum rounding drift.
  std::size_t last_missing = std::numeric_limits<std::size_t>::max();
  for (std::size_t t = 0; t < n; ++t) {
    if (series.missing[t]) last_missing = t;
    const std::size_t begin = t + 1 >= width ? t + 1 - width : 0;
    if (last_missing != std::numeric_limits<std::size_t>::max() && last_missing >= begin) {
      out.values[t] = std::numeric_limits<double>::quiet_NaN();
      out.missing[t] = true;
      continue;
    }
    double sum = 0.0;
    for (std::size_t k = begin; k <= t; ++k) sum += series.values[k];
    out.values[t] = sum / static_cast<double>(t - begin + 1);
    out.missing[t] = false;
  }
  return out;
}

Session smooth_session(const Session& session, SmoothingSpec spec) {
  Session out = session;
  for (auto& ch : out.channels) ch = smooth(ch, spec);
  return out;
}

WindowSample extract_window(const Session& smoothed, double anchor_s, SmoothingSpec spec) {
  const auto seg = static_cast<double>(kSegmentLength);
  if (!std::isfinite(anchor_s) || anchor_s < seg || anchor_s + seg > smoothed.duration_s)
    throw Error(ErrorCode::out_of_bounds,
                smoothed.participant_id + ": anchor " + detail::format_double(anchor_s) +
                    " s leaves no room for two 20 s segments in a " +
                    detail::format_double(smoothed.duration_s) + " s session");

  const auto anchor = static_cast<std::size_t>(std::floor(anchor_s));
  WindowSample w;
  w.participant_id = smoothed.participant_id;
  w.gender = smoothed.gender;
  w.label = smoothed.group == Group::phone ? 1 : 0;
  w.anchor_s = anchor_s;
  w.smoothing = spec;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const auto& s = smoothed.channels[c];
    if (anchor + kSegmentLength > s.size())
      throw Error(ErrorCode::out_of_bounds, smoothed.participant_id + ": channel " +
                                                std::string(channel_name(s.channel)) +
                                                " is shorter than the window");
    for (std::size_t k = 0; k < kSegmentLength; ++k) {
      const std::size_t ia = anchor - kSegmentLength + k;
      const std::size_t ib = anchor + k;
      if (s.missing[ia] || s.missing[ib])
        throw Error(ErrorCode::missing_data_in_window,
                    smoothed.participant_id + ": missing " + std::string(channel_name(s.channel)) +
                        " sample in window at " + detail::format_double(anchor_s) + " s");
      w.segment_a[c][k] = s.values[ia];
      w.segment_b[c][k] = s.values[ib];
    }
  }
  return w;
}

std::vector<WindowSample> extract_samples(const Session& session, SmoothingSpec spec,
                                          const WindowPolicy& policy) {
  const auto anchors = select_event_anchors(session, policy);
  const Session smoothed = smooth_session(session, spec);
  std::vector<WindowSample> out;
  out.reserve(anchors.size());
  for (double a : anchors) out.push_back(extract_window(smoothed, a, spec));
  return out;
}

std::vector<WindowSample> build_windows(std::span<const Session> sessions, SmoothingSpec spec,
                                        const WindowPolicy& policy, Execution exec) {
  const auto n = static_cast<long>(sessions.size());
  std::vector<std::vector<WindowSample>> per_session(sessions.size());

  if (exec == Execution::serial) {
    for (long i = 0; i < n; ++i) per_session[i] = extract_samples(sessions[i], spec, policy);
  } else {
    std::vector<std::exception_ptr> errors(sessions.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
      try {
        per_session[i] = extract_samples(sessions[i], spec, policy);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<WindowSample> out;
  out.reserve(sessions.size() * 2);
  for (auto& v : per_session)
    for (auto& w : v) out.push_back(std::move(w));
  return out;
}

void write_window_dump(std::span<const WindowSample> samples, const std::filesystem::path& file) {
  std::string out = "participant_id,label,anchor_s,channel,segment";
  for (std::size_t k = 0; k < kSegmentLength; ++k) out += ",v" + std::to_string(k);
  out += '\n';
  for (const auto& w : samples) {
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      for (int part = 0; part < 2; ++part) {
        const Segment& seg = part == 0 ? w.segment_a[c] : w.segment_b[c];
        out += w.participant_id + ',' + std::to_string(w.label) + ',' +
               detail::format_double(w.anchor_s) + ',' + std::string(channel_name(kAllChannels[c])) +
               (part == 0 ? ",a" : ",b");
        for (double v : seg) out += ',' + detail::format_double(v);
        out += '\n';
      }
    }
  }
  detail::write_file(file, out);
}

}  // namespace phonesense
