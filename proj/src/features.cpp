#include "phonesense/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phonesense/error.hpp"
#include "text_io.hpp"

namespace phonesense {

namespace {

double guarded_ratio(double num, double den) {
  return std::abs(den) < kDenominatorGuard ? 0.0 : num / den;
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  double rms = 0.0;
  double mean_abs = 0.0;
  double max = 0.0;
  double max_abs = 0.0;
  std::size_t argmax = 0;
  std::size_t argmax_abs = 0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  const auto n = static_cast<double>(v.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  double sum_abs = 0.0;
  m.max = v[0];
  m.max_abs = std::abs(v[0]);
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    sum_sq += v[i] * v[i];
    sum_abs += std::abs(v[i]);
    if (v[i] > m.max) {
      m.max = v[i];
      m.argmax = i;
    }
    if (std::abs(v[i]) > m.max_abs) {
      m.max_abs = std::abs(v[i]);
      m.argmax_abs = i;
    }
  }
  m.mean = sum / n;
  m.rms = std::sqrt(sum_sq / n);
  m.mean_abs = sum_abs / n;
  double centered = 0.0;
  for (double x : v) centered += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(centered / n);
  return m;
}

double median_of(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

void check_signal_set(std::span<const ChannelId> signal_set) {
  if (signal_set.empty()) throw Error(ErrorCode::unknown_channel, "empty signal set");
  std::array<bool, kChannelCount> seen{};
  for (auto c : signal_set) {
    const auto i = index_of(c);
    if (i >= kChannelCount)
      throw Error(ErrorCode::unknown_channel, "channel index " + std::to_string(i));
    if (seen[i])
      throw Error(ErrorCode::unknown_channel, "duplicate channel " + std::string(channel_name(c)));
    seen[i] = true;
  }
}

}  // namespace

Derivatives derivatives(std::span<const double> x) {
  if (x.size() < 4)
    throw Error(ErrorCode::too_short, "need at least 4 samples, got " + std::to_string(x.size()));
  Derivatives d;
  auto diff = [](std::span<const double> in) {
    std::vector<double> out(in.size() - 1);
    for (std::size_t i = 0; i + 1 < in.size(); ++i) out[i] = in[i + 1] - in[i];
    return out;
  };
  d.velocity = diff(x);
  d.acceleration = diff(d.velocity);
  d.jerk = diff(d.acceleration);
  return d;
}

GlobalFeatures compute_features(std::span<const double> x, int gender) {
  if (x.size() != kSegmentLength)
    throw Error(ErrorCode::wrong_length,
                "segment must have 20 samples, got " + std::to_string(x.size()));
  const auto d = derivatives(x);
  const auto& v = d.velocity;
  const auto& a = d.acceleration;
  const auto& j = d.jerk;
  const auto L = static_cast<double>(x.size());

  const Moments mx = moments(x);
  const Moments mv = moments(v);
  const Moments ma = moments(a);
  const Moments mj = moments(j);
  const double x_min = *std::min_element(x.begin(), x.end());
  const double range = mx.max - x_min;

  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_count = 0, neg_count = 0, sign_changes = 0;
  int prev_sign = 0;
  for (double dv : v) {
    if (dv > 0) {
      pos_sum += dv;
      ++pos_count;
    } else if (dv < 0) {
      neg_sum += dv;
      ++neg_count;
    }
    const int sign = (dv > 0) - (dv < 0);
    if (sign != 0) {
      if (prev_sign != 0 && sign != prev_sign) ++sign_changes;
      prev_sign = sign;
    }
  }

  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < x.size(); ++i)
    if (x[i] > x[i - 1] && x[i] > x[i + 1]) peaks.push_back(i);
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](std::size_t p, std::size_t q) { return x[p] > x[q]; });

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double xi : x) {
    const double c = xi - mx.mean;
    const double c2 = c * c;
    m2 += c2;
    m3 += c2 * c;
    m4 += c2 * c2;
  }
  m2 /= L;
  m3 /= L;
  m4 /= L;

  GlobalFeatures g{};
  g[0] = pos_sum;
  g[1] = neg_sum;
  for (std::size_t k = 0; k < 3 && k < peaks.size(); ++k)
    g[2 + k] = static_cast<double>(peaks[k]) / (L - 1.0);
  if (peaks.empty()) g[2] = static_cast<double>(mx.argmax) / (L - 1.0);
  g[5] = guarded_ratio(mv.mean, mv.max_abs);
  g[6] = guarded_ratio(mv.mean, mv.max);
  g[7] = guarded_ratio(mv.rms, mv.max_abs);
  g[8] = mx.mean;
  g[9] = mx.std;
  g[10] = guarded_ratio(ma.rms, ma.max_abs);
  g[11] = median_of(x);
  g[12] = mv.std;
  g[13] = ma.std;
  g[14] = mj.mean_abs;
  g[15] = mj.mean;
  g[16] = mj.max_abs;
  g[17] = mj.max;
  g[18] = mj.rms;
  const double jerk_span = static_cast<double>(j.size() - 1);
  g[19] = static_cast<double>(mj.argmax_abs) / jerk_span;
  g[20] = static_cast<double>(mj.argmax) / jerk_span;
  g[21] = static_cast<double>(sign_changes);
  g[22] = guarded_ratio(pos_sum, -neg_sum);
  g[23] = guarded_ratio(static_cast<double>(pos_count), static_cast<double>(neg_count));
  g[24] = range;
  g[25] = guarded_ratio(mv.mean, range);
  g[26] = static_cast<double>(peaks.size());
  g[27] = ma.mean_abs;
  g[28] = mx.max;
  g[29] = x_min;
  g[30] = guarded_ratio(m3, std::pow(m2, 1.5));
  g[31] = std::abs(m2 * m2) < kDenominatorGuard ? 0.0 : m4 / (m2 * m2) - 3.0;
  g[32] = static_cast<double>(gender);
  return g;
}

FusedVector fuse(const WindowSample& sample, std::span<const ChannelId> signal_set) {
  check_signal_set(signal_set);
  FusedVector out;
  out.participant_id = sample.participant_id;
  out.label = sample.label;
  out.signal_set.assign(signal_set.begin(), signal_set.end());
  out.values.reserve(fused_dimension(signal_set.size()));
  for (auto c : signal_set) {
    for (const Segment* seg : {&sample.segment_a[index_of(c)], &sample.segment_b[index_of(c)]}) {
      const auto g = compute_features(*seg, sample.gender);
      out.values.insert(out.values.end(), g.begin(), g.begin() + kSegmentFeatureCount);
    }
  }
  out.values.push_back(static_cast<double>(sample.gender));
  return out;
}

FusedDataset make_dataset(std::span<const FusedVector> vectors) {
  FusedDataset data;
  if (vectors.empty()) return data;
  const auto D = vectors.front().values.size();
  data.signal_set = vectors.front().signal_set;
  data.features.resize(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(D));
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    if (vectors[r].values.size() != D)
      throw Error(ErrorCode::dimension_mismatch, "fused vectors differ in length");
    data.participant_ids.push_back(vectors[r].participant_id);
    data.labels.push_back(vectors[r].label);
    data.anchors.push_back(0.0);
    for (std::size_t c = 0; c < D; ++c)
      data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vectors[r].values[c];
  }
  return data;
}

FeatureTable FeatureTable::build(std::span<const WindowSample> samples, Execution exec) {
  FeatureTable t;
  const std::size_t n = samples.size();
  t.blocks_.assign(n * kChannelCount * kChannelBlock, 0.0);
  for (const auto& s : samples) {
    t.participant_ids_.push_back(s.participant_id);
    t.labels_.push_back(s.label);
    t.genders_.push_back(s.gender);
    t.anchors_.push_back(s.anchor_s);
  }

  auto fill_row = [&](std::size_t r) {
    const auto& s = samples[r];
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      double* out = t.blocks_.data() + (r * kChannelCount + c) * kChannelBlock;
      const auto ga = compute_features(s.segment_a[c], s.gender);
      const auto gb = compute_features(s.segment_b[c], s.gender);
      std::copy(ga.begin(), ga.begin() + kSegmentFeatureCount, out);
      std::copy(gb.begin(), gb.begin() + kSegmentFeatureCount, out + kSegmentFeatureCount);
    }
  };

  const auto rows = static_cast<long>(n);
  if (exec == Execution::serial) {
    for (long r = 0; r < rows; ++r) fill_row(static_cast<std::size_t>(r));
  } else {
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) fill_row(static_cast<std::size_t>(r));
  }
  return t;
}

std::span<const double> FeatureTable::block(std::size_t row, ChannelId c) const {
  return {blocks_.data() + (row * kChannelCount + index_of(c)) * kChannelBlock, kChannelBlock};
}

FusedDataset FeatureTable::assemble(std::span<const ChannelId> signal_set) const {
  check_signal_set(signal_set);
  FusedDataset data;
  data.participant_ids = participant_ids_;
  data.labels = labels_;
  data.anchors = anchors_;
  data.signal_set.assign(signal_set.begin(), signal_set.end());
  const auto D = fused_dimension(signal_set.size());
  data.features.resize(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(D));
  for (std::size_t r = 0; r < size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    Eigen::Index col = 0;
    for (auto c : signal_set)
      for (double value : block(r, c)) data.features(row, col++) = value;
    data.features(row, col) = static_cast<double>(genders_[r]);
  }
  return data;
}

void write_feature_csv(const FusedDataset& data, const std::filesystem::path& file) {
  std::string out = "participant_id,label";
  for (std::size_t c = 0; c < data.dimension(); ++c) out += ",f" + std::to_string(c + 1);
  out += '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    out += data.participant_ids[r];
    out += ',';
    out += std::to_string(data.labels[r]);
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
      out += ',';
      out += detail::format_double(data.features(static_cast<Eigen::Index>(r), c));
    }
    out += '\n';
  }
  detail::write_file(file, out);
}

FusedDataset read_feature_csv(const std::filesystem::path& file) {
  const std::string content = detail::read_file(file);
  const auto lines = detail::lines_of(content);
  auto fail = [&](std::size_t line, const std::string& what) -> Error {
    return Error(ErrorCode::malformed_row,
                 file.filename().string() + " line " + std::to_string(line) + ": " + what);
  };
  if (lines.empty()) throw fail(1, "empty file");
  const auto header = detail::split(lines[0]);
  if (header.size() < 3 || header[0] != "participant_id" || header[1] != "label")
    throw fail(1, "expected header participant_id,label,f1..fD");
  const std::size_t D = header.size() - 2;
  for (std::size_t c = 0; c < D; ++c)
    if (header[c + 2] != "f" + std::to_string(c + 1)) throw fail(1, "bad feature column name");

  std::vector<FusedVector> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = detail::split(lines[i]);
    if (fields.size() != D + 2) throw fail(i + 1, "wrong field count");
    FusedVector v;
    v.participant_id = std::string(fields[0]);
    if (fields[1] == "1") {
      v.label = 1;
    } else if (fields[1] == "0") {
      v.label = 0;
    } else {
      throw fail(i + 1, "label must be 0 or 1");
    }
    v.values.reserve(D);
    for (std::size_t c = 0; c < D; ++c) {
      const auto value = detail::parse_double(fields[c + 2]);
      if (!value) throw fail(i + 1, "bad number in column f" + std::to_string(c + 1));
      v.values.push_back(*value);
    }
    rows.push_back(std::move(v));
  }
  return make_dataset(rows);
}

ZScoreParams zscore_fit(const Eigen::MatrixXd& train, std::string fitted_on) {
  if (train.rows() == 0) throw Error(ErrorCode::empty_training_set, "z-score fit on 0 rows");
  ZScoreParams p;
  p.fitted_on = std::move(fitted_on);
  const auto n = static_cast<double>(train.rows());
  p.means = train.colwise().mean().transpose();
  p.stds.resize(train.cols());
  for (Eigen::Index c = 0; c < train.cols(); ++c)
    p.stds(c) = std::sqrt((train.col(c).array() - p.means(c)).square().sum() / n);
  return p;
}

ZScoreParams zscore_fit(std::span<const FusedVector> train, std::string fitted_on) {
  if (train.empty()) throw Error(ErrorCode::empty_training_set, "z-score fit on 0 vectors");
  return zscore_fit(make_dataset(train).features, std::move(fitted_on));
}

Eigen::MatrixXd ZScoreParams::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != means.size())
    throw Error(ErrorCode::dimension_mismatch, "z-score expects " + std::to_string(means.size()) +
                                                   " columns, got " + std::to_string(x.cols()));
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (stds(c) < kMinStd) {
      out.col(c).setZero();
    } else {
      out.col(c) = (x.col(c).array() - means(c)) / stds(c);
    }
  }
  return out;
}

FusedVector ZScoreParams::apply(const FusedVector& v) const {
  if (v.values.size() != static_cast<std::size_t>(means.size()))
    throw Error(ErrorCode::dimension_mismatch, "z-score dimension mismatch");
  FusedVector out = v;
  for (std::size_t c = 0; c < v.values.size(); ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    out.values[c] = stds(i) < kMinStd ? 0.0 : (v.values[c] - means(i)) / stds(i);
  }
  return out;
}

}  // namespace phonesense
