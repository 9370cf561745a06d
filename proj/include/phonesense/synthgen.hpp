#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonesense/execution.hpp"
#include "phonesense/session.hpp"

namespace phonesense {

struct ChannelProfile {
  double mean = 0.0;
  double noise_std = 1.0;  // stationary std of the AR(1) baseline
};

/// Effect sizes are what an event adds when it is expressed on a channel.
/// Each phone event independently expresses a head-pose response and a
/// physiological response. A physiological response always moves heart
/// rate; attention, beta and gamma each join with physio_channel_prob.
struct GeneratorPreset {
  std::string name = "strong";
  std::uint64_t seed = 42;
  std::array<ChannelProfile, kChannelCount> channels{};
  double ar_phi = 0.8;
  double participant_offset = 0.5;  // per-participant level shift, in noise stds

  double pitch_drop_deg = 0.0;
  double yaw_shift_deg = 0.0;       // random sign per event
  double yaw_jitter_deg = 0.0;      // extra white noise on yaw during events
  double hr_ramp_bpm = 0.0;         // reached after hr_ramp_s seconds
  double hr_ramp_s = 10.0;
  double eeg_shift_db = 0.0;        // beta and gamma, upward
  double attention_drop = 0.0;

  double head_pose_response_prob = 1.0;
  double physio_response_prob = 1.0;
  double physio_channel_prob = 1.0;

  double short_event_prob = 0.25;   // events shorter than one segment

  static GeneratorPreset strong(std::uint64_t seed = 42);
  static GeneratorPreset weak(std::uint64_t seed = 42);
  static GeneratorPreset null(std::uint64_t seed = 42);
  /// "strong", "weak" or "null"; throws config_error otherwise.
  static GeneratorPreset named(const std::string& name, std::uint64_t seed = 42);

  [[nodiscard]] bool has_effects() const noexcept;
};

/// What a single phone event actually carried.
struct EventExpression {
  double start_s = 0.0;
  double end_s = 0.0;
  bool head_pose = false;
  double yaw_sign = 1.0;
  bool attention = false;
  bool beta = false;
  bool gamma = false;
  bool heart_rate = false;
};

/// Participant ids are "P" + 3-digit (index + 1); gender alternates with the
/// index. Deterministic per (preset.seed, participant_index).
Session generate_session(const GeneratorPreset& preset, std::size_t participant_index, Group group,
                         std::vector<EventExpression>* expression = nullptr);

std::string participant_id_for(std::size_t participant_index);

/// Writes phone sessions first (indices 0..n_phone-1), then nophone ones,
/// each into out_dir/<participant_id>, plus out_dir/manifest.json.
nlohmann::json generate_dataset(const GeneratorPreset& preset, std::size_t n_phone, std::size_t n_nophone,
                                const std::filesystem::path& out_dir,
                                Execution exec = Execution::parallel);

}  // namespace phonesense
