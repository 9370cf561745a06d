#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phonesense/execution.hpp"
#include "phonesense/preprocess.hpp"
#include "phonesense/session.hpp"

namespace phonesense {

/// Table of 33 global features per 20 s segment (g1..g33, stored 0-based).
inline constexpr std::size_t kGlobalFeatureCount = 33;
/// Features that depend on the segment; g33 (gender) is appended once per
/// fused vector instead.
inline constexpr std::size_t kSegmentFeatureCount = 32;
inline constexpr std::size_t kChannelBlock = 2 * kSegmentFeatureCount;

/// Guard used by every ratio feature: |denominator| below this yields 0.
inline constexpr double kDenominatorGuard = 1e-12;

using GlobalFeatures = std::array<double, kGlobalFeatureCount>;

struct Derivatives {
  std::vector<double> velocity;
  std::vector<double> acceleration;
  std::vector<double> jerk;
};

/// First three forward differences. Requires at least 4 samples.
Derivatives derivatives(std::span<const double> x);

/// Computes g1..g33 for one segment of exactly 20 samples.
///
/// Conventions that the table leaves open:
///  - g3..g5: positions index/(L-1) of the three largest interior strict local
///    maxima (ties to the earliest). Missing slots are 0; with no interior
///    maximum at all, g3 is the position of the global argmax.
///  - g15 is mean |jerk|, g16 the signed mean.
///  - g20/g21: argmax of |jerk| / jerk, normalized by (len(jerk)-1).
///  - g22 counts velocity sign changes, skipping exact zeros.
///  - g24 is the count ratio #(v>0)/#(v<0); g23 the magnitude ratio.
///  - Moments are population moments; g32 is excess kurtosis.
GlobalFeatures compute_features(std::span<const double> segment, int gender);

inline constexpr std::size_t fused_dimension(std::size_t n_signals) noexcept {
  return kChannelBlock * n_signals + 1;
}

/// Early-fusion vector: per channel in declared order, segment_a g1..g32 then
/// segment_b g1..g32; gender once at the end.
struct FusedVector {
  std::string participant_id;
  int label = 0;
  std::vector<double> values;
  std::vector<ChannelId> signal_set;
};

FusedVector fuse(const WindowSample& sample, std::span<const ChannelId> signal_set);

/// Design matrix for one signal set: rows are window samples in dataset
/// order, columns follow the fuse layout.
struct FusedDataset {
  std::vector<std::string> participant_ids;
  std::vector<int> labels;
  std::vector<double> anchors;
  std::vector<ChannelId> signal_set;
  Eigen::MatrixXd features;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] std::size_t dimension() const noexcept {
    return static_cast<std::size_t>(features.cols());
  }
};

FusedDataset make_dataset(std::span<const FusedVector> vectors);

/// Precomputed per-channel 64-feature blocks for every sample, so that any
/// signal subset can be assembled without recomputing features.
class FeatureTable {
 public:
  FeatureTable() = default;

  static FeatureTable build(std::span<const WindowSample> samples,
                            Execution exec = Execution::parallel);

  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] FusedDataset assemble(std::span<const ChannelId> signal_set) const;

  /// The 64 values of channel `c` for sample `row`.
  [[nodiscard]] std::span<const double> block(std::size_t row, ChannelId c) const;

 private:
  std::vector<std::string> participant_ids_;
  std::vector<int> labels_;
  std::vector<int> genders_;
  std::vector<double> anchors_;
  std::vector<double> blocks_;  // row-major: sample, channel, 64 features
};

/// CSV export with header participant_id,label,f1..fD.
void write_feature_csv(const FusedDataset& data, const std::filesystem::path& file);
FusedDataset read_feature_csv(const std::filesystem::path& file);

struct ZScoreParams {
  Eigen::VectorXd means;
  Eigen::VectorXd stds;
  std::string fitted_on;

  /// Columns whose std is below this map to exactly 0.
  static constexpr double kMinStd = 1e-12;

  [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  [[nodiscard]] FusedVector apply(const FusedVector& v) const;
};

/// Population mean/std per column of the training rows.
ZScoreParams zscore_fit(const Eigen::MatrixXd& train, std::string fitted_on = {});
ZScoreParams zscore_fit(std::span<const FusedVector> train, std::string fitted_on = {});

}  // namespace phonesense
