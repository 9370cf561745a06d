#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phonesense {

enum class ChannelId : std::uint8_t {
  attention,
  meditation,
  alpha,
  beta,
  gamma,
  delta,
  theta,
  heart_rate,
  roll,
  yaw,
  pitch,
};

inline constexpr std::size_t kChannelCount = 11;

inline constexpr std::array<ChannelId, kChannelCount> kAllChannels{
    ChannelId::attention, ChannelId::meditation, ChannelId::alpha, ChannelId::beta,
    ChannelId::gamma,     ChannelId::delta,      ChannelId::theta, ChannelId::heart_rate,
    ChannelId::roll,      ChannelId::yaw,        ChannelId::pitch,
};

constexpr std::size_t index_of(ChannelId id) noexcept { return static_cast<std::size_t>(id); }

std::string_view channel_name(ChannelId id) noexcept;
std::optional<ChannelId> parse_channel(std::string_view name) noexcept;

/// One channel of one session, uniformly sampled. After ingestion every
/// series in a session is at 1 Hz starting at t0_s = 0.
struct SignalSeries {
  ChannelId channel = ChannelId::attention;
  double rate_hz = 1.0;
  double t0_s = 0.0;
  std::vector<double> values;
  std::vector<bool> missing;

  [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
  [[nodiscard]] std::size_t missing_count() const noexcept;
};

enum class EventKind { phone, activity };
enum class Group { phone, nophone };

std::string_view to_string(EventKind kind) noexcept;
std::string_view to_string(Group group) noexcept;

struct EventSpan {
  double start_s = 0.0;
  double end_s = 0.0;
  EventKind kind = EventKind::activity;
  std::string activity;

  [[nodiscard]] double length() const noexcept { return end_s - start_s; }
};

struct Session {
  std::string participant_id;
  int gender = 0;
  Group group = Group::nophone;
  std::array<SignalSeries, kChannelCount> channels;
  std::vector<EventSpan> events;
  double duration_s = 0.0;

  [[nodiscard]] const SignalSeries& channel(ChannelId id) const noexcept {
    return channels[index_of(id)];
  }
  [[nodiscard]] SignalSeries& channel(ChannelId id) noexcept { return channels[index_of(id)]; }

  /// Phone spans ordered by start time.
  [[nodiscard]] std::vector<EventSpan> phone_events() const;
};

/// A raw sample as read from disk; an empty value marks a missing reading.
struct TimedSample {
  double t_s = 0.0;
  std::optional<double> value;
};

struct ResampleOptions {
  double gap_fill_s = 3.0;
  /// Output length in seconds; defaults to floor(last timestamp) + 1.
  std::optional<std::size_t> n_seconds;
};

/// Per-second mean over [t, t+1). Seconds without a valid raw sample are
/// linearly interpolated when the gap is at most gap_fill_s long and both
/// neighbours exist; otherwise they are flagged missing.
SignalSeries resample_1hz(ChannelId channel, std::span<const TimedSample> raw,
                          const ResampleOptions& options = {});

/// Number of seconds in [0, n_seconds) that contain no valid raw sample.
std::size_t count_lost_seconds(std::span<const TimedSample> raw, std::size_t n_seconds);

struct LoadOptions {
  double max_missing_fraction = 0.20;
  double gap_fill_s = 3.0;
};

Session load_session(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Writes participant.json, events.csv and signals/<channel>.csv. Values are
/// printed in shortest round-trip form, so a session loaded from 1 Hz files
/// written here is re-emitted byte for byte.
void write_session(const Session& session, const std::filesystem::path& dir);

/// Checks the structural invariants of a loaded or generated session and
/// throws Error(invalid_metadata) on the first violation.
void validate_session(const Session& session);

struct WindowPolicy {
  std::vector<std::string> match_activities{"video2", "reading_code"};
  std::uint64_t seed = 42;
  double segment_s = 20.0;
};

/// Two window anchors per session: the first two phone-event starts for the
/// phone group, or seeded positions inside matching activities otherwise.
std::vector<double> select_event_anchors(const Session& session, const WindowPolicy& policy);

/// Loads every immediate subdirectory of `root` that holds a participant.json,
/// in lexicographic directory order.
std::vector<Session> load_sessions(const std::filesystem::path& root,
                                   const LoadOptions& options = {});

}  // namespace phonesense
