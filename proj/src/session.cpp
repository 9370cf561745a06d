#include "phonesense/session.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "phonesense/error.hpp"
#include "phonesense/rng.hpp"
#include "text_io.hpp"

namespace phonesense {
namespace fs = std::filesystem;
using detail::format_double;

namespace {

constexpr std::array<std::string_view, kChannelCount> kChannelNames{
    "attention", "meditation", "alpha", "beta", "gamma", "delta",
    "theta",     "heart_rate", "roll",  "yaw",  "pitch",
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void malformed(const fs::path& file, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::malformed_row,
              file.filename().string() + " line " + std::to_string(line) + ": " + what);
}

std::vector<TimedSample> read_signal_csv(const fs::path& file) {
  const std::string content = detail::read_file(file);
  const auto lines = detail::lines_of(content);
  if (lines.empty() || lines.front() != "t_s,value") malformed(file, 1, "expected header 't_s,value'");

  std::vector<TimedSample> raw;
  raw.reserve(lines.size() - 1);
  double last_t = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = detail::split(lines[i]);
    if (fields.size() != 2) malformed(file, i + 1, "expected 2 fields");
    const auto t = detail::parse_double(fields[0]);
    if (!t || !std::isfinite(*t) || *t < 0.0) malformed(file, i + 1, "bad timestamp");
    if (*t < last_t) malformed(file, i + 1, "timestamps must be non-decreasing");
    last_t = *t;
    TimedSample sample{*t, std::nullopt};
    if (!fields[1].empty()) {
      const auto v = detail::parse_double(fields[1]);
      if (!v || !std::isfinite(*v)) malformed(file, i + 1, "bad value");
      sample.value = *v;
    }
    raw.push_back(sample);
  }
  return raw;
}

std::vector<EventSpan> read_events_csv(const fs::path& file) {
  if (!fs::exists(file)) throw Error(ErrorCode::invalid_metadata, "missing events.csv");
  const std::string content = detail::read_file(file);
  const auto lines = detail::lines_of(content);
  if (lines.empty() || lines.front() != "start_s,end_s,kind,activity")
    malformed(file, 1, "expected header 'start_s,end_s,kind,activity'");

  std::vector<EventSpan> events;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = detail::split(lines[i]);
    if (fields.size() != 4) malformed(file, i + 1, "expected 4 fields");
    const auto start = detail::parse_double(fields[0]);
    const auto end = detail::parse_double(fields[1]);
    if (!start || !end || *start < 0.0 || !(*end > *start))
      malformed(file, i + 1, "need 0 <= start_s < end_s");
    EventSpan span;
    span.start_s = *start;
    span.end_s = *end;
    if (fields[2] == "phone") {
      span.kind = EventKind::phone;
    } else if (fields[2] == "activity") {
      span.kind = EventKind::activity;
    } else {
      malformed(file, i + 1, "unknown kind '" + std::string(fields[2]) + "'");
    }
    span.activity = std::string(fields[3]);
    events.push_back(std::move(span));
  }
  return events;
}

void read_participant(const fs::path& file, Session& session) {
  if (!fs::exists(file)) throw Error(ErrorCode::invalid_metadata, "missing participant.json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_metadata, std::string("participant.json: ") + e.what());
  }
  if (!meta.is_object()) throw Error(ErrorCode::invalid_metadata, "participant.json must be an object");
  if (!meta.contains("id") || !meta["id"].is_string() || meta["id"].get<std::string>().empty())
    throw Error(ErrorCode::invalid_metadata, "participant.json: 'id' must be a non-empty string");
  if (!meta.contains("gender") || !meta["gender"].is_number_integer())
    throw Error(ErrorCode::invalid_metadata, "participant.json: 'gender' must be 0 or 1");
  const auto gender = meta["gender"].get<long long>();
  if (gender != 0 && gender != 1)
    throw Error(ErrorCode::invalid_metadata, "participant.json: 'gender' must be 0 or 1");
  if (!meta.contains("group") || !meta["group"].is_string())
    throw Error(ErrorCode::invalid_metadata, "participant.json: 'group' missing");
  const auto group = meta["group"].get<std::string>();
  if (group == "phone") {
    session.group = Group::phone;
  } else if (group == "nophone") {
    session.group = Group::nophone;
  } else {
    throw Error(ErrorCode::invalid_metadata, "participant.json: unknown group '" + group + "'");
  }
  session.participant_id = meta["id"].get<std::string>();
  session.gender = static_cast<int>(gender);
}

}  // namespace

std::string_view channel_name(ChannelId id) noexcept { return kChannelNames[index_of(id)]; }

std::optional<ChannelId> parse_channel(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kChannelCount; ++i)
    if (kChannelNames[i] == name) return kAllChannels[i];
  return std::nullopt;
}

std::size_t SignalSeries::missing_count() const noexcept {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), true));
}

std::string_view to_string(EventKind kind) noexcept {
  return kind == EventKind::phone ? "phone" : "activity";
}

std::string_view to_string(Group group) noexcept {
  return group == Group::phone ? "phone" : "nophone";
}

std::vector<EventSpan> Session::phone_events() const {
  std::vector<EventSpan> out;
  for (const auto& e : events)
    if (e.kind == EventKind::phone) out.push_back(e);
  std::stable_sort(out.begin(), out.end(),
                   [](const EventSpan& a, const EventSpan& b) { return a.start_s < b.start_s; });
  return out;
}

SignalSeries resample_1hz(ChannelId channel, std::span<const TimedSample> raw,
                          const ResampleOptions& options) {
  for (std::size_t i = 1; i < raw.size(); ++i)
    if (raw[i].t_s < raw[i - 1].t_s)
      throw Error(ErrorCode::unsorted_input,
                  "sample " + std::to_string(i) + " precedes its predecessor");

  std::size_t n = 0;
  if (options.n_seconds) {
    n = *options.n_seconds;
  } else if (!raw.empty()) {
    n = static_cast<std::size_t>(std::floor(raw.back().t_s)) + 1;
  }

  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const auto& s : raw) {
    if (!s.value || s.t_s < 0.0) continue;
    const auto sec = static_cast<std::size_t>(std::floor(s.t_s));
    if (sec >= n) continue;
    sum[sec] += *s.value;
    ++count[sec];
  }

  SignalSeries out;
  out.channel = channel;
  out.rate_hz = 1.0;
  out.t0_s = 0.0;
  out.values.assign(n, kNaN);
  out.missing.assign(n, true);
  for (std::size_t t = 0; t < n; ++t) {
    if (count[t] == 0) continue;
    out.values[t] = sum[t] / static_cast<double>(count[t]);
    out.missing[t] = false;
  }

  // Fill interior gaps no longer than gap_fill_s.
  std::size_t t = 0;
  while (t < n) {
    if (!out.missing[t]) {
      ++t;
      continue;
    }
    const std::size_t gap_begin = t;
    while (t < n && out.missing[t]) ++t;
    const std::size_t gap_end = t;  // first present index after the gap, or n
    const auto gap_len = static_cast<double>(gap_end - gap_begin);
    if (gap_begin == 0 || gap_end == n || gap_len > options.gap_fill_s) continue;
    const std::size_t left = gap_begin - 1;
    const double v0 = out.values[left];
    const double v1 = out.values[gap_end];
    const auto span = static_cast<double>(gap_end - left);
    for (std::size_t k = gap_begin; k < gap_end; ++k) {
      out.values[k] = v0 + (v1 - v0) * static_cast<double>(k - left) / span;
      out.missing[k] = false;
    }
  }
  return out;
}

std::size_t count_lost_seconds(std::span<const TimedSample> raw, std::size_t n_seconds) {
  std::vector<bool> covered(n_seconds, false);
  for (const auto& s : raw) {
    if (!s.value || s.t_s < 0.0) continue;
    const auto sec = static_cast<std::size_t>(std::floor(s.t_s));
    if (sec < n_seconds) covered[sec] = true;
  }
  return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), false));
}

void validate_session(const Session& session) {
  if (session.participant_id.empty())
    throw Error(ErrorCode::invalid_metadata, "empty participant id");
  if (session.gender != 0 && session.gender != 1)
    throw Error(ErrorCode::invalid_metadata, "gender must be 0 or 1");
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    const auto& s = session.channels[i];
    if (s.channel != kAllChannels[i])
      throw Error(ErrorCode::invalid_metadata, "channel slot mismatch for " +
                                                   std::string(channel_name(kAllChannels[i])));
    if (s.values.size() != s.missing.size())
      throw Error(ErrorCode::invalid_metadata, "values/missing length mismatch");
    if (!(s.rate_hz > 0.0)) throw Error(ErrorCode::invalid_metadata, "rate_hz must be positive");
  }
  for (const auto& e : session.events) {
    if (!(e.end_s > e.start_s) || e.start_s < 0.0 || e.end_s > session.duration_s)
      throw Error(ErrorCode::invalid_metadata,
                  "event [" + format_double(e.start_s) + ", " + format_double(e.end_s) +
                      ") outside session of " + format_double(session.duration_s) + " s");
  }
  const auto phones = session.phone_events();
  for (std::size_t i = 1; i < phones.size(); ++i)
    if (phones[i].start_s < phones[i - 1].end_s)
      throw Error(ErrorCode::invalid_metadata, "overlapping phone events");
  if (session.group == Group::phone && phones.size() < 2)
    throw Error(ErrorCode::invalid_metadata,
                "phone-group session " + session.participant_id + " has fewer than 2 phone events");
}

Session load_session(const fs::path& dir, const LoadOptions& options) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io_failure, "not a directory: " + dir.string());
  Session session;
  read_participant(dir / "participant.json", session);
  session.events = read_events_csv(dir / "events.csv");

  std::array<std::vector<TimedSample>, kChannelCount> raw;
  std::size_t n_seconds = 0;
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    const auto name = std::string(kChannelNames[i]);
    const fs::path file = dir / "signals" / (name + ".csv");
    if (!fs::exists(file)) throw Error(ErrorCode::missing_channel, name);
    raw[i] = read_signal_csv(file);
    if (!raw[i].empty())
      n_seconds = std::max(n_seconds, static_cast<std::size_t>(std::floor(raw[i].back().t_s)) + 1);
  }
  if (n_seconds == 0) throw Error(ErrorCode::invalid_metadata, "session has no samples");
  session.duration_s = static_cast<double>(n_seconds);

  for (std::size_t i = 0; i < kChannelCount; ++i) {
    const std::size_t lost = count_lost_seconds(raw[i], n_seconds);
    const double fraction = static_cast<double>(lost) / static_cast<double>(n_seconds);
    if (fraction > options.max_missing_fraction) {
      std::ostringstream msg;
      msg << kChannelNames[i] << " lost " << lost << " of " << n_seconds << " s";
      throw Error(ErrorCode::excessive_data_loss, msg.str());
    }
    session.channels[i] =
        resample_1hz(kAllChannels[i], raw[i], {.gap_fill_s = options.gap_fill_s, .n_seconds = n_seconds});
  }
  validate_session(session);
  return session;
}

void write_session(const Session& session, const fs::path& dir) {
  nlohmann::json meta;
  meta["id"] = session.participant_id;
  meta["gender"] = session.gender;
  meta["group"] = std::string(to_string(session.group));
  detail::write_file(dir / "participant.json", meta.dump(2) + "\n");

  std::string events = "start_s,end_s,kind,activity\n";
  for (const auto& e : session.events) {
    events += format_double(e.start_s);
    events += ',';
    events += format_double(e.end_s);
    events += ',';
    events += to_string(e.kind);
    events += ',';
    events += e.activity;
    events += '\n';
  }
  detail::write_file(dir / "events.csv", events);

  for (const auto& series : session.channels) {
    std::string out = "t_s,value\n";
    out.reserve(series.size() * 16);
    const double step = 1.0 / series.rate_hz;
    for (std::size_t i = 0; i < series.size(); ++i) {
      out += format_double(series.t0_s + static_cast<double>(i) * step);
      out += ',';
      if (!series.missing[i]) out += format_double(series.values[i]);
      out += '\n';
    }
    detail::write_file(dir / "signals" / (std::string(channel_name(series.channel)) + ".csv"), out);
  }
}

std::vector<double> select_event_anchors(const Session& session, const WindowPolicy& policy) {
  if (session.group == Group::phone) {
    const auto phones = session.phone_events();
    if (phones.size() < 2)
      throw Error(ErrorCode::not_enough_events,
                  session.participant_id + ": fewer than 2 phone events");
    return {phones[0].start_s, phones[1].start_s};
  }

  const std::set<std::string> match(policy.match_activities.begin(), policy.match_activities.end());
  std::vector<EventSpan> candidates;
  for (const auto& e : session.events)
    if (e.kind == EventKind::activity && match.contains(e.activity)) candidates.push_back(e);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const EventSpan& a, const EventSpan& b) { return a.start_s < b.start_s; });

  Rng rng(substream_seed(policy.seed, stable_hash(session.participant_id), 0xa7c4));
  std::vector<double> anchors;
  for (const auto& act : candidates) {
    if (anchors.size() == 2) break;
    // Whole-second anchors with a full segment of activity on both sides.
    const double lo = std::ceil(act.start_s + policy.segment_s);
    const double hi = std::floor(std::min(act.end_s, session.duration_s) - policy.segment_s);
    if (lo > hi) continue;
    std::uniform_int_distribution<long long> pick(static_cast<long long>(lo),
                                                  static_cast<long long>(hi));
    anchors.push_back(static_cast<double>(pick(rng)));
  }
  if (anchors.size() < 2)
    throw Error(ErrorCode::not_enough_events,
                session.participant_id + ": fewer than 2 usable matching activities");
  return anchors;
}

std::vector<Session> load_sessions(const fs::path& root, const LoadOptions& options) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::io_failure, "not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "participant.json"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<Session> sessions;
  sessions.reserve(dirs.size());
  for (const auto& d : dirs) sessions.push_back(load_session(d, options));
  return sessions;
}

}  // namespace phonesense
