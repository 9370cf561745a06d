#include "phonesense/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <exception>

#include "phonesense/error.hpp"
#include "phonesense/rng.hpp"
#include "text_io.hpp"

namespace phonesense {

namespace {

constexpr std::uint64_t kBaselineTag = 0xba5e;
constexpr std::uint64_t kEventTag = 0xe7e7;

struct Activity {
  const char* label;
  double start_s;
  double end_s;  // <0 means "session end"
};

constexpr std::array<Activity, 6> kTimeline{{
    {"video1", 0, 240},
    {"reading_content", 240, 480},
    {"video2", 480, 780},
    {"assignment1", 780, 1080},
    {"reading_code", 1080, 1380},
    {"assignment2", 1380, -1},
}};

constexpr std::array<std::size_t, 2> kPhoneActivities{2, 4};  // video2, reading_code

std::array<ChannelProfile, kChannelCount> default_profiles() {
  std::array<ChannelProfile, kChannelCount> p{};
  p[index_of(ChannelId::attention)] = {50.0, 8.0};
  p[index_of(ChannelId::meditation)] = {50.0, 8.0};
  p[index_of(ChannelId::alpha)] = {20.0, 2.0};
  p[index_of(ChannelId::beta)] = {15.0, 2.0};
  p[index_of(ChannelId::gamma)] = {10.0, 2.0};
  p[index_of(ChannelId::delta)] = {25.0, 3.0};
  p[index_of(ChannelId::theta)] = {20.0, 2.5};
  p[index_of(ChannelId::heart_rate)] = {75.0, 3.0};
  p[index_of(ChannelId::roll)] = {0.0, 2.0};
  p[index_of(ChannelId::yaw)] = {0.0, 3.0};
  p[index_of(ChannelId::pitch)] = {-5.0, 3.0};
  return p;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

void apply_event(const GeneratorPreset& p, const EventExpression& e, Session& s, Rng& rng) {
  const auto first = static_cast<std::size_t>(e.start_s);
  const auto last = std::min(static_cast<std::size_t>(e.end_s), static_cast<std::size_t>(s.duration_s));
  std::normal_distribution<double> jitter(0.0, p.yaw_jitter_deg);
  for (std::size_t t = first; t < last; ++t) {
    if (e.head_pose) {
      s.channel(ChannelId::pitch).values[t] -= p.pitch_drop_deg;
      s.channel(ChannelId::yaw).values[t] += e.yaw_sign * p.yaw_shift_deg + jitter(rng);
    }
    if (e.attention) s.channel(ChannelId::attention).values[t] -= p.attention_drop;
    if (e.beta) s.channel(ChannelId::beta).values[t] += p.eeg_shift_db;
    if (e.gamma) s.channel(ChannelId::gamma).values[t] += p.eeg_shift_db;
    if (e.heart_rate) {
      const double ramp = std::min(1.0, static_cast<double>(t - first + 1) / p.hr_ramp_s);
      s.channel(ChannelId::heart_rate).values[t] += p.hr_ramp_bpm * ramp;
    }
  }
}

}  // namespace

GeneratorPreset GeneratorPreset::strong(std::uint64_t seed) {
  GeneratorPreset p;
  p.name = "strong";
  p.seed = seed;
  p.channels = default_profiles();
  p.pitch_drop_deg = 15.0;
  p.yaw_shift_deg = 10.0;
  p.yaw_jitter_deg = 3.0;
  p.hr_ramp_bpm = 12.0;
  p.eeg_shift_db = 6.0;
  p.attention_drop = 25.0;
  p.head_pose_response_prob = 0.75;
  p.physio_response_prob = 0.6;
  p.physio_channel_prob = 0.5;
  return p;
}

GeneratorPreset GeneratorPreset::weak(std::uint64_t seed) {
  GeneratorPreset p = strong(seed);
  p.name = "weak";
  p.pitch_drop_deg = 3.0;
  p.yaw_shift_deg = 3.0;
  p.yaw_jitter_deg = 1.0;
  p.hr_ramp_bpm = 3.0;
  p.eeg_shift_db = 2.0;
  p.attention_drop = 8.0;
  return p;
}

GeneratorPreset GeneratorPreset::null(std::uint64_t seed) {
  GeneratorPreset p = strong(seed);
  p.name = "null";
  p.pitch_drop_deg = 0.0;
  p.yaw_shift_deg = 0.0;
  p.yaw_jitter_deg = 0.0;
  p.hr_ramp_bpm = 0.0;
  p.eeg_shift_db = 0.0;
  p.attention_drop = 0.0;
  return p;
}

GeneratorPreset GeneratorPreset::named(const std::string& name, std::uint64_t seed) {
  if (name == "strong") return strong(seed);
  if (name == "weak") return weak(seed);
  if (name == "null") return null(seed);
  throw Error(ErrorCode::config_error, "unknown preset '" + name + "' (strong, weak, null)");
}

bool GeneratorPreset::has_effects() const noexcept {
  return pitch_drop_deg != 0.0 || yaw_shift_deg != 0.0 || yaw_jitter_deg != 0.0 || hr_ramp_bpm != 0.0 ||
         eeg_shift_db != 0.0 || attention_drop != 0.0;
}

std::string participant_id_for(std::size_t participant_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "P%03zu", participant_index + 1);
  return buf;
}

Session generate_session(const GeneratorPreset& p, std::size_t index, Group group,
                         std::vector<EventExpression>* expression) {
  Session s;
  s.participant_id = participant_id_for(index);
  s.gender = static_cast<int>(index % 2);
  s.group = group;

  // Baseline first, from its own stream, so both groups share the exact
  // same code path and distribution outside phone events.
  Rng rng(substream_seed(p.seed, index, kBaselineTag));
  const auto n = static_cast<std::size_t>(std::uniform_int_distribution<int>(1500, 1800)(rng));
  s.duration_s = static_cast<double>(n);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double innovation = std::sqrt(1.0 - p.ar_phi * p.ar_phi);
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const auto& prof = p.channels[c];
    auto& series = s.channels[c];
    series.channel = kAllChannels[c];
    series.values.resize(n);
    series.missing.assign(n, false);
    const double level = prof.mean + p.participant_offset * prof.noise_std * unit(rng);
    double e = prof.noise_std * unit(rng);
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0) e = p.ar_phi * e + innovation * prof.noise_std * unit(rng);
      series.values[t] = level + e;
    }
  }

  for (const auto& a : kTimeline)
    s.events.push_back({a.start_s, a.end_s < 0 ? s.duration_s : a.end_s, EventKind::activity, a.label});

  if (group == Group::phone) {
    Rng ev(substream_seed(p.seed, index, kEventTag));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<EventExpression> expr;
    for (auto ai : kPhoneActivities) {
      const auto& a = kTimeline[ai];
      const int len = static_cast<int>(a.end_s - a.start_s);
      EventExpression e;
      e.start_s = a.start_s + std::uniform_int_distribution<int>(40, len - 80)(ev);
      const bool short_event = u01(ev) < p.short_event_prob;
      e.end_s = e.start_s + (short_event ? std::uniform_int_distribution<int>(8, 19)(ev)
                                         : std::uniform_int_distribution<int>(20, 60)(ev));
      e.head_pose = u01(ev) < p.head_pose_response_prob;
      e.yaw_sign = u01(ev) < 0.5 ? -1.0 : 1.0;
      const bool physio = u01(ev) < p.physio_response_prob;
      e.attention = physio && u01(ev) < p.physio_channel_prob;
      e.beta = physio && u01(ev) < p.physio_channel_prob;
      e.gamma = physio && u01(ev) < p.physio_channel_prob;
      e.heart_rate = physio;
      apply_event(p, e, s, ev);
      s.events.push_back({e.start_s, e.end_s, EventKind::phone, a.label});
      expr.push_back(e);
    }
    if (expression) *expression = std::move(expr);
  } else if (expression) {
    expression->clear();
  }

  for (auto& series : s.channels)
    for (double& v : series.values) v = round3(v);
  validate_session(s);
  return s;
}

nlohmann::json generate_dataset(const GeneratorPreset& preset, std::size_t n_phone, std::size_t n_nophone,
                                const std::filesystem::path& out_dir, Execution exec) {
  if (n_phone < 1 || n_nophone < 1)
    throw Error(ErrorCode::config_error, "need at least one session per group");
  const std::size_t total = n_phone + n_nophone;
  std::vector<nlohmann::json> entries(total);
  std::vector<std::exception_ptr> errors(total);

  auto one = [&](std::size_t i) {
    const Group group = i < n_phone ? Group::phone : Group::nophone;
    std::vector<EventExpression> expr;
    const Session s = generate_session(preset, i, group, &expr);
    write_session(s, out_dir / s.participant_id);
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : expr)
      events.push_back({{"start_s", e.start_s},
                        {"end_s", e.end_s},
                        {"head_pose", e.head_pose},
                        {"yaw_sign", e.yaw_sign},
                        {"attention", e.attention},
                        {"beta", e.beta},
                        {"gamma", e.gamma},
                        {"heart_rate", e.heart_rate}});
    entries[i] = {{"participant_id", s.participant_id},
                  {"group", std::string(to_string(group))},
                  {"gender", s.gender},
                  {"path", s.participant_id},
                  {"duration_s", s.duration_s},
                  {"phone_events", events}};
  };

  const auto n = static_cast<long>(total);
  if (exec == Execution::serial) {
    for (long i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
      try {
        one(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  nlohmann::json manifest = {{"format", "phonesense.synth_manifest"},
                             {"version", 1},
                             {"seed", preset.seed},
                             {"preset", preset.name},
                             {"n_phone", n_phone},
                             {"n_nophone", n_nophone},
                             {"expected_windows", 2 * total},
                             {"sessions", entries}};
  detail::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace phonesense
