#include <gtest/gtest.h>

#include <set>

#include "oracles/oracles.hpp"
#include "phonesense/error.hpp"
#include "phonesense/features.hpp"
#include "phonesense/synthgen.hpp"
#include "support/test_support.hpp"

using namespace phonesense;

namespace {

std::vector<double> ramp() {
  std::vector<double> x(20);
  for (int i = 0; i < 20; ++i) x[static_cast<std::size_t>(i)] = i;
  return x;
}

void expect_close(double got, double want, double rel, const std::string& what) {
  const double tol = rel * std::max(std::fabs(want), 1e-3);
  EXPECT_NEAR(got, want, tol) << what;
}

WindowSample sample_with_pattern(int gender) {
  WindowSample w;
  w.participant_id = "P9";
  w.gender = gender;
  w.label = 1;
  std::mt19937_64 rng(17);
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const auto a = testing_support::random_segment(rng, 1.0 + static_cast<double>(c));
    const auto b = testing_support::random_segment(rng, 2.0);
    std::copy(a.begin(), a.end(), w.segment_a[c].begin());
    std::copy(b.begin(), b.end(), w.segment_b[c].begin());
  }
  return w;
}

}  // namespace

TEST(Derivatives, Ramp) {
  const std::vector<double> x{0, 1, 2, 3};
  const auto d = derivatives(x);
  EXPECT_EQ(d.velocity, (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(d.acceleration, (std::vector<double>{0, 0}));
  EXPECT_EQ(d.jerk, (std::vector<double>{0}));
}

TEST(Derivatives, Alternating) {
  const std::vector<double> x{0, 1, 0, 1};
  const auto d = derivatives(x);
  EXPECT_EQ(d.velocity, (std::vector<double>{1, -1, 1}));
  EXPECT_EQ(d.acceleration, (std::vector<double>{-2, 2}));
  EXPECT_EQ(d.jerk, (std::vector<double>{4}));
}

TEST(Derivatives, ConstantIsZero) {
  const std::vector<double> x(20, 3.5);
  const auto d = derivatives(x);
  for (double v : d.velocity) EXPECT_EQ(v, 0.0);
  for (double v : d.jerk) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(d.jerk.size(), 17u);
}

TEST(Derivatives, TooShort) {
  const std::vector<double> x{1, 2, 3};
  try {
    derivatives(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::too_short);
  }
}

TEST(GlobalFeatures, ConstantSegment) {
  const std::vector<double> x(20, 5.0);
  const auto g = compute_features(x, 0);
  EXPECT_EQ(g[8], 5.0);   // g9
  EXPECT_EQ(g[9], 0.0);   // g10
  EXPECT_EQ(g[24], 0.0);  // g25
  EXPECT_EQ(g[28], 5.0);
  EXPECT_EQ(g[29], 5.0);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  for (int k : {5, 6, 7, 22, 23, 25, 30, 31}) EXPECT_EQ(g[static_cast<std::size_t>(k)], 0.0) << "g" << k + 1;
  for (int k : {10, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 26, 27})
    EXPECT_EQ(g[static_cast<std::size_t>(k)], 0.0) << "g" << k + 1;
  EXPECT_EQ(g[11], 5.0);  // median
  EXPECT_EQ(g[32], 0.0);
}

TEST(GlobalFeatures, Ramp) {
  const auto g = compute_features(ramp(), 1);
  EXPECT_DOUBLE_EQ(g[8], 9.5);
  EXPECT_DOUBLE_EQ(g[24], 19.0);
  EXPECT_DOUBLE_EQ(g[0], 19.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[21], 0.0);
  EXPECT_EQ(g[26], 0.0);
  EXPECT_EQ(g[32], 1.0);
  EXPECT_DOUBLE_EQ(g[2], 1.0);  // no interior maximum: global argmax at the end
  EXPECT_DOUBLE_EQ(g[23], 0.0);  // no negative velocity, guarded
}

TEST(GlobalFeatures, PeakLocations) {
  std::vector<double> x(20, 0.0);
  x[3] = 5;
  x[10] = 9;
  x[15] = 7;
  x[17] = 1;
  const auto g = compute_features(x, 0);
  EXPECT_DOUBLE_EQ(g[2], 10.0 / 19.0);
  EXPECT_DOUBLE_EQ(g[3], 15.0 / 19.0);
  EXPECT_DOUBLE_EQ(g[4], 3.0 / 19.0);
  EXPECT_EQ(g[26], 4.0);
}

TEST(GlobalFeatures, FewerThanThreePeaksLeaveZeros) {
  std::vector<double> x(20, 0.0);
  x[6] = 2;
  const auto g = compute_features(x, 0);
  EXPECT_DOUBLE_EQ(g[2], 6.0 / 19.0);
  EXPECT_EQ(g[3], 0.0);
  EXPECT_EQ(g[4], 0.0);
}

TEST(GlobalFeatures, SignChangesSkipZeros) {
  // v = +1, 0, -1, 0, +1, then zeros: two changes.
  std::vector<double> x{0, 1, 1, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  EXPECT_EQ(compute_features(x, 0)[21], 2.0);
}

TEST(GlobalFeatures, WrongLength) {
  const std::vector<double> x(19, 1.0);
  try {
    compute_features(x, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::wrong_length);
  }
}

TEST(GlobalFeatures, MatchesNaiveOracleOnRandomSegments) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = testing_support::random_segment(rng, 0.1 + trial % 7);
    const int gender = trial % 2;
    const auto got = compute_features(x, gender);
    const auto want = oracle::global_features(x, gender);
    for (std::size_t k = 0; k < 33; ++k) expect_close(got[k], want[k], 1e-9, "g" + std::to_string(k + 1));
  }
}

TEST(GlobalFeatures, MatchesOracleOnQuantizedSegmentsWithTies) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> level(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> x(20);
    for (auto& v : x) v = level(rng);
    const auto got = compute_features(x, 0);
    const auto want = oracle::global_features(x, 0);
    for (std::size_t k = 0; k < 33; ++k) expect_close(got[k], want[k], 1e-9, "g" + std::to_string(k + 1));
  }
}

TEST(GlobalFeatures, AlwaysFinite) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = testing_support::random_segment(rng, std::pow(10.0, trial % 9 - 4));
    for (double v : compute_features(x, 1)) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(GlobalFeatures, TranslationShiftsOnlyLevelFeatures) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> d(-50, 50);
  const std::set<std::size_t> level{8, 11, 28, 29};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(20), y(20);
    const double c = d(rng);
    for (std::size_t i = 0; i < 20; ++i) {
      x[i] = d(rng);
      y[i] = x[i] + c;
    }
    const auto gx = compute_features(x, 0);
    const auto gy = compute_features(y, 0);
    for (std::size_t k = 0; k < 33; ++k) {
      const double want = level.count(k) ? gx[k] + c : gx[k];
      EXPECT_NEAR(gy[k], want, 1e-9 * std::max(1.0, std::fabs(want))) << "g" << k + 1;
    }
  }
}

TEST(GlobalFeatures, ScalingCovariance) {
  std::mt19937_64 rng(12);
  const std::set<std::size_t> scaled{0, 1, 8, 9, 11, 12, 13, 14, 15, 16, 17, 18, 24, 27, 28, 29};
  for (double s : {2.0, 0.37, 13.0}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto x = testing_support::random_segment(rng);
      std::vector<double> y(x);
      for (auto& v : y) v *= s;
      const auto gx = compute_features(x, 1);
      const auto gy = compute_features(y, 1);
      for (std::size_t k = 0; k < 33; ++k) {
        const double want = scaled.count(k) ? s * gx[k] : gx[k];
        EXPECT_NEAR(gy[k], want, 1e-9 * std::max(1.0, std::fabs(want))) << "g" << k + 1 << " s=" << s;
      }
    }
  }
}

TEST(Fuse, Dimensions) {
  const auto w = sample_with_pattern(1);
  EXPECT_EQ(fuse(w, std::vector<ChannelId>{ChannelId::pitch}).values.size(), 65u);
  EXPECT_EQ(fuse(w, std::vector<ChannelId>{ChannelId::roll, ChannelId::yaw, ChannelId::pitch}).values.size(), 193u);
  std::vector<ChannelId> eeg_hr(kAllChannels.begin(), kAllChannels.begin() + 8);
  EXPECT_EQ(fuse(w, eeg_hr).values.size(), 513u);
  EXPECT_EQ(fuse(w, kAllChannels).values.size(), 705u);
  for (std::size_t s = 1; s <= 11; ++s) EXPECT_EQ(fused_dimension(s), 64 * s + 1);
}

TEST(Fuse, Layout) {
  const auto w = sample_with_pattern(1);
  const std::vector<ChannelId> hp{ChannelId::roll, ChannelId::yaw, ChannelId::pitch};
  const auto v = fuse(w, hp).values;
  for (std::size_t c = 0; c < hp.size(); ++c) {
    const auto ga = compute_features(w.segment_a[index_of(hp[c])], 1);
    const auto gb = compute_features(w.segment_b[index_of(hp[c])], 1);
    for (std::size_t k = 0; k < 32; ++k) {
      EXPECT_EQ(v[64 * c + k], ga[k]);
      EXPECT_EQ(v[64 * c + 32 + k], gb[k]);
    }
  }
  EXPECT_EQ(v.back(), 1.0);
}

TEST(Fuse, RejectsBadSignalSets) {
  const auto w = sample_with_pattern(0);
  EXPECT_THROW(fuse(w, std::vector<ChannelId>{}), Error);
  try {
    fuse(w, std::vector<ChannelId>{ChannelId::yaw, ChannelId::yaw});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_channel);
  }
}

TEST(FeatureTable, AssembleMatchesFuseAndIsScheduleIndependent) {
  std::vector<WindowSample> samples;
  for (int i = 0; i < 6; ++i) {
    auto w = sample_with_pattern(i % 2);
    w.participant_id = "P" + std::to_string(i / 2);
    w.label = i < 4 ? 1 : 0;
    for (auto& seg : w.segment_b) seg[3] += i;
    samples.push_back(w);
  }
  const auto serial = FeatureTable::build(samples, Execution::serial);
  const auto parallel = FeatureTable::build(samples, Execution::parallel);
  const std::vector<ChannelId> set{ChannelId::beta, ChannelId::attention};
  const auto a = serial.assemble(set);
  const auto b = parallel.assemble(set);
  EXPECT_TRUE(a.features == b.features);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto v = fuse(samples[r], set).values;
    for (std::size_t k = 0; k < v.size(); ++k) EXPECT_EQ(a.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)), v[k]);
  }
  EXPECT_EQ(a.labels, (std::vector<int>{1, 1, 1, 1, 0, 0}));
}

TEST(FeatureCsv, RoundTripIsExact) {
  std::vector<WindowSample> samples{sample_with_pattern(0), sample_with_pattern(1)};
  samples[1].participant_id = "P10";
  samples[1].label = 0;
  const auto data = FeatureTable::build(samples).assemble(std::vector<ChannelId>{ChannelId::gamma});
  testing_support::TempDir dir("fcsv");
  write_feature_csv(data, dir / "f.csv");
  const auto text = testing_support::slurp(dir / "f.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')).substr(0, 28), "participant_id,label,f1,f2,f");
  const auto back = read_feature_csv(dir / "f.csv");
  EXPECT_EQ(back.participant_ids, data.participant_ids);
  EXPECT_EQ(back.labels, data.labels);
  EXPECT_TRUE(back.features == data.features);
}

TEST(ZScore, TrainingColumnsStandardized) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(3, 7);
  Eigen::MatrixXd x(40, 6);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = c == 2 ? 1.5 : n(rng);
  const auto p = zscore_fit(x, "fold-0");
  const Eigen::MatrixXd z = p.apply(x);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).mean();
    const double sd = std::sqrt((z.col(c).array() - m).square().mean());
    EXPECT_LT(std::fabs(m), 1e-9);
    if (c == 2) {
      EXPECT_EQ(sd, 0.0);
      EXPECT_TRUE((z.col(c).array() == 0.0).all());
    } else {
      EXPECT_NEAR(sd, 1.0, 1e-9);
    }
  }
  EXPECT_EQ(p.fitted_on, "fold-0");
  const Eigen::MatrixXd zz = zscore_fit(z).apply(z);
  EXPECT_LT((zz - z).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ZScore, HandCase) {
  Eigen::MatrixXd train(2, 1);
  train << 0, 2;
  const auto p = zscore_fit(train);
  Eigen::MatrixXd probe(1, 1);
  probe << 1;
  EXPECT_EQ(p.apply(probe)(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(p.stds(0), 1.0);
}

TEST(ZScore, SingleVectorMapsToZero) {
  FusedVector v;
  v.values = {1.0, -2.0, 3.0};
  const std::vector<FusedVector> train{v};
  const auto p = zscore_fit(train);
  for (double x : p.apply(v).values) EXPECT_EQ(x, 0.0);
}

TEST(ZScore, EmptyTrainingSet) {
  try {
    zscore_fit(Eigen::MatrixXd(0, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_training_set);
  }
}
