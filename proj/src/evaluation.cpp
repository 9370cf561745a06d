#include "phonesense/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <set>

#include "phonesense/error.hpp"
#include "phonesense/rng.hpp"
#include "text_io.hpp"

namespace phonesense {

namespace {

constexpr std::uint64_t kFoldStreamTag = 0xf01d;

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

struct FoldResult {
  FoldAudit audit;
  std::vector<double> scores;  // aligned with audit.test_rows
};

FoldResult run_fold(const FusedDataset& data, const PipelineConfig& config, const Fold& fold,
                    std::size_t fold_index) {
  FoldResult result;
  auto& audit = result.audit;
  audit.fold_id = fold.fold_id;
  audit.test_participant = fold.test_participant;
  for (std::size_t r = 0; r < data.size(); ++r)
    (data.participant_ids[r] == fold.test_participant ? audit.test_rows : audit.train_rows).push_back(r);

  std::vector<int> y_train;
  y_train.reserve(audit.train_rows.size());
  for (auto r : audit.train_rows) y_train.push_back(data.labels[r]);
  const auto ones = std::count(y_train.begin(), y_train.end(), 1);
  if (ones == 0 || ones == static_cast<long>(y_train.size()))
    throw Error(ErrorCode::single_class_fold, fold.fold_id + " has a single-class training set");

  const Eigen::MatrixXd x_train = gather_rows(data.features, audit.train_rows);
  const Eigen::MatrixXd x_test = gather_rows(data.features, audit.test_rows);

  const ZScoreParams zs = zscore_fit(x_train, fold.fold_id);
  const Eigen::MatrixXd z_train = zs.apply(x_train);
  const FittedReducer reducer = reducer_fit(config.reduction, z_train, y_train, fold.fold_id);
  const Eigen::MatrixXd r_train = reducer.apply(z_train);

  ModelSpec spec = config.model;
  spec.seed = substream_seed(config.seed, fold_index, kFoldStreamTag);
  const TrainedModel model = train_model(spec, r_train, y_train, fold.fold_id, Execution::serial);

  result.scores = predict_scores(model, reducer.apply(zs.apply(x_test)));
  audit.zscore_fitted_on = zs.fitted_on;
  audit.reducer_fitted_on = reducer.fitted_on;
  audit.model_fitted_on = model.fitted_on;
  audit.reduced_dim = reducer.output_dim();
  return result;
}

void check_audit(const FoldAudit& audit, const FusedDataset& data) {
  if (audit.zscore_fitted_on != audit.fold_id || audit.reducer_fitted_on != audit.fold_id ||
      audit.model_fitted_on != audit.fold_id)
    throw Error(ErrorCode::internal, audit.fold_id + ": artifact fitted on another fold");
  for (auto r : audit.train_rows)
    if (data.participant_ids[r] == audit.test_participant)
      throw Error(ErrorCode::internal, audit.fold_id + ": test participant in training rows");
  if (audit.train_rows.size() + audit.test_rows.size() != data.size())
    throw Error(ErrorCode::internal, audit.fold_id + ": rows lost in split");
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] * std::log(p[i] / q[i]);
  return sum;
}

std::size_t bin_of(double score) {
  const double s = std::clamp(score, 0.0, 1.0);
  return std::min(static_cast<std::size_t>(s * static_cast<double>(kScoreBins)), kScoreBins - 1);
}

std::vector<double> histogram(std::span<const double> scores) {
  std::vector<double> h(kScoreBins, 0.0);
  for (double s : scores) h[bin_of(s)] += 1.0;
  for (double& v : h) v /= static_cast<double>(scores.size());
  return h;
}

std::vector<double> smoothed_histogram(std::span<const double> scores) {
  auto h = histogram(scores);
  const double norm = 1.0 + static_cast<double>(kScoreBins) * kKlEpsilon;
  for (double& v : h) v = (v + kKlEpsilon) / norm;
  return h;
}

}  // namespace

FoldPlan make_fold_plan(std::span<const std::string> participant_ids) {
  const std::set<std::string> unique(participant_ids.begin(), participant_ids.end());
  FoldPlan plan;
  std::size_t index = 0;
  for (const auto& test : unique) {
    Fold fold;
    fold.fold_id = "fold-" + std::to_string(index++) + ":" + test;
    fold.test_participant = test;
    for (const auto& other : unique)
      if (other != test) fold.train_participants.push_back(other);
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

std::string PipelineConfig::fingerprint() const {
  return signal_set + "|s" + std::to_string(smoothing) + "|" + reduction.to_string() + "|" +
         model.to_string() + "|seed=" + std::to_string(seed);
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"signal_set", signal_set},
          {"smoothing", smoothing},
          {"reduction", reduction.to_string()},
          {"model", model.to_string()},
          {"seed", seed}};
}

std::vector<bool> EvaluationReport::correctness() const {
  std::vector<bool> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.correct);
  return out;
}

EvaluationReport run_loo(const FusedDataset& data, const PipelineConfig& config, Execution exec) {
  if (data.size() == 0) throw Error(ErrorCode::empty_input, "empty dataset");
  std::map<std::string, std::size_t> per_participant;
  for (const auto& id : data.participant_ids) ++per_participant[id];
  for (const auto& [id, count] : per_participant)
    if (count != 2)
      throw Error(ErrorCode::unbalanced_participant,
                  id + " has " + std::to_string(count) + " samples, expected 2");

  const FoldPlan plan = make_fold_plan(data.participant_ids);
  const auto n_folds = static_cast<long>(plan.folds.size());
  std::vector<FoldResult> results(plan.folds.size());

  if (exec == Execution::serial) {
    for (long f = 0; f < n_folds; ++f)
      results[static_cast<std::size_t>(f)] =
          run_fold(data, config, plan.folds[static_cast<std::size_t>(f)], static_cast<std::size_t>(f));
  } else {
    std::vector<std::exception_ptr> errors(plan.folds.size());
#pragma omp parallel for schedule(dynamic)
    for (long f = 0; f < n_folds; ++f) {
      const auto i = static_cast<std::size_t>(f);
      try {
        results[i] = run_fold(data, config, plan.folds[i], i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EvaluationReport report;
  report.config = config;
  // Folds follow participant order; rows within a participant keep dataset order.
  for (auto& res : results) {
    check_audit(res.audit, data);
    for (std::size_t k = 0; k < res.audit.test_rows.size(); ++k) {
      const auto r = res.audit.test_rows[k];
      SampleRecord rec;
      rec.participant_id = data.participant_ids[r];
      rec.label = data.labels[r];
      rec.anchor_s = r < data.anchors.size() ? data.anchors[r] : 0.0;
      rec.score = res.scores[k];
      rec.correct = (rec.score >= 0.5 ? 1 : 0) == rec.label;
      report.records.push_back(std::move(rec));
    }
    report.audits.push_back(std::move(res.audit));
  }

  std::vector<int> labels;
  std::vector<double> scores;
  std::size_t correct = 0;
  for (const auto& r : report.records) {
    labels.push_back(r.label);
    scores.push_back(r.score);
    correct += r.correct ? 1 : 0;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.records.size());
  report.roc = roc_auc(labels, scores);
  report.densities = score_densities(labels, scores);
  std::vector<double> pos, neg;
  for (const auto& r : report.records) (r.label == 1 ? pos : neg).push_back(r.score);
  report.kl = kl_divergence(pos, neg);
  return report;
}

McNemarResult mcnemar(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::length_mismatch, "McNemar inputs have different lengths");
  McNemarResult r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) ++r.b;
    if (!a[i] && b[i]) ++r.c;
  }
  const double disc = static_cast<double>(r.b + r.c);
  if (disc == 0.0) return r;
  const double d = std::abs(static_cast<double>(r.b) - static_cast<double>(r.c)) - 1.0;
  r.chi2 = d * d / disc;
  // Survival of chi-square with 1 dof: 2 * (1 - Phi(sqrt(chi2))).
  r.p = std::erfc(std::sqrt(r.chi2) / std::sqrt(2.0));
  return r;
}

KlDivergence kl_divergence(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw Error(ErrorCode::empty_input, "KL needs scores of both classes");
  const auto p = smoothed_histogram(pos);
  const auto q = smoothed_histogram(neg);
  KlDivergence k;
  k.forward = kl(p, q);
  k.reverse = kl(q, p);
  k.symmetric = 0.5 * (k.forward + k.reverse);
  return k;
}

RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw Error(ErrorCode::length_mismatch, "labels and scores differ");
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::single_class, "ROC needs both classes");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double tp = 0, fp = 0, area2 = 0;  // area2 = 2 * P * N * AUC, exact in integers
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    const double tp0 = tp, fp0 = fp;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp) += 1.0;
      ++i;
    }
    area2 += (fp - fp0) * (tp + tp0);
    roc.points.push_back({s, fp / n_neg, tp / n_pos});
  }
  roc.auc = area2 / (2.0 * n_pos * n_neg);
  return roc;
}

ScoreDensities score_densities(std::span<const int> labels, std::span<const double> scores) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  ScoreDensities d;
  d.phone = pos.empty() ? std::vector<double>(kScoreBins, 0.0) : histogram(pos);
  d.nophone = neg.empty() ? std::vector<double>(kScoreBins, 0.0) : histogram(neg);
  for (std::size_t b = 0; b < kScoreBins; ++b) {
    d.bin_lo.push_back(static_cast<double>(b) / static_cast<double>(kScoreBins));
    d.bin_hi.push_back(static_cast<double>(b + 1) / static_cast<double>(kScoreBins));
  }
  return d;
}

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records)
    records.push_back({{"participant_id", r.participant_id},
                       {"label", r.label},
                       {"anchor_s", r.anchor_s},
                       {"score", r.score},
                       {"correct", r.correct}});
  std::size_t reduced_dim_max = 0;
  for (const auto& a : report.audits) reduced_dim_max = std::max(reduced_dim_max, a.reduced_dim);
  return {{"format", "phonesense.report"},
          {"version", kReportFormatVersion},
          {"fingerprint", report.config.fingerprint()},
          {"config", report.config.to_json()},
          {"accuracy", report.accuracy},
          {"auc", report.roc.auc},
          {"kl", {{"forward", report.kl.forward}, {"reverse", report.kl.reverse}, {"symmetric", report.kl.symmetric}}},
          {"n_folds", report.audits.size()},
          {"max_reduced_dim", reduced_dim_max},
          {"records", records}};
}

EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "phonesense.report")
      throw Error(ErrorCode::config_error, "not a report artifact");
    EvaluationReport report;
    const auto& c = j.at("config");
    report.config.signal_set = c.at("signal_set").get<std::string>();
    report.config.smoothing = c.at("smoothing").get<int>();
    report.config.reduction = ReductionSpec::parse(c.at("reduction").get<std::string>());
    report.config.model = ModelSpec::parse(c.at("model").get<std::string>());
    report.config.seed = c.at("seed").get<std::uint64_t>();
    std::vector<int> labels;
    std::vector<double> scores, pos, neg;
    for (const auto& r : j.at("records")) {
      SampleRecord rec;
      rec.participant_id = r.at("participant_id").get<std::string>();
      rec.label = r.at("label").get<int>();
      rec.anchor_s = r.at("anchor_s").get<double>();
      rec.score = r.at("score").get<double>();
      rec.correct = r.at("correct").get<bool>();
      labels.push_back(rec.label);
      scores.push_back(rec.score);
      (rec.label == 1 ? pos : neg).push_back(rec.score);
      report.records.push_back(std::move(rec));
    }
    report.accuracy = j.at("accuracy").get<double>();
    report.roc = roc_auc(labels, scores);
    report.densities = score_densities(labels, scores);
    report.kl = kl_divergence(pos, neg);
    // Per-fold audits are not serialized; only their count and the largest
    // reduced dimension survive.
    report.audits.resize(j.at("n_folds").get<std::size_t>());
    if (!report.audits.empty()) report.audits.front().reduced_dim = j.at("max_reduced_dim").get<std::size_t>();
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("report artifact: ") + e.what());
  }
}

std::string predictions_csv(const EvaluationReport& report) {
  std::string out = "participant_id,label,score,correct\n";
  for (const auto& r : report.records)
    out += r.participant_id + ',' + std::to_string(r.label) + ',' + detail::format_double(r.score) + ',' +
           (r.correct ? "1" : "0") + '\n';
  return out;
}

std::string roc_csv(const RocCurve& roc) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : roc.points)
    out += detail::format_double(p.threshold) + ',' + detail::format_double(p.fpr) + ',' +
           detail::format_double(p.tpr) + '\n';
  return out;
}

std::string densities_csv(const ScoreDensities& d) {
  std::string out = "bin_lo,bin_hi,p_phone,p_nophone\n";
  for (std::size_t b = 0; b < d.bin_lo.size(); ++b)
    out += detail::format_double(d.bin_lo[b]) + ',' + detail::format_double(d.bin_hi[b]) + ',' +
           detail::format_double(d.phone[b]) + ',' + detail::format_double(d.nophone[b]) + '\n';
  return out;
}

}  // namespace phonesense
