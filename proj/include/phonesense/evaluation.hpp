#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonesense/classifiers.hpp"
#include "phonesense/dimreduce.hpp"
#include "phonesense/execution.hpp"
#include "phonesense/features.hpp"

namespace phonesense {

struct Fold {
  std::string fold_id;
  std::string test_participant;
  std::vector<std::string> train_participants;
};

/// One fold per participant, ordered by participant id.
struct FoldPlan {
  std::vector<Fold> folds;
};

FoldPlan make_fold_plan(std::span<const std::string> participant_ids);

struct PipelineConfig {
  std::string signal_set = "custom";
  int smoothing = 0;
  ReductionSpec reduction;
  ModelSpec model;
  /// Base seed; fold k trains its model with a substream of it.
  std::uint64_t seed = 42;

  /// Stable textual identity of the configuration.
  [[nodiscard]] std::string fingerprint() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

struct SampleRecord {
  std::string participant_id;
  int label = 0;
  double anchor_s = 0.0;
  double score = 0.0;
  bool correct = false;
};

/// What each fold fitted and on which rows; run_loo refuses to return a
/// report whose artifacts were fitted on anything but their own fold.
struct FoldAudit {
  std::string fold_id;
  std::string test_participant;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::string zscore_fitted_on;
  std::string reducer_fitted_on;
  std::string model_fitted_on;
  std::size_t reduced_dim = 0;
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

struct KlDivergence {
  double forward = 0.0;    // KL(phone || nophone)
  double reverse = 0.0;    // KL(nophone || phone)
  double symmetric = 0.0;  // mean of the two
};

struct ScoreDensities {
  std::vector<double> bin_lo;
  std::vector<double> bin_hi;
  std::vector<double> phone;
  std::vector<double> nophone;
};

struct McNemarResult {
  std::size_t b = 0;  // A correct, B wrong
  std::size_t c = 0;  // A wrong, B correct
  double chi2 = 0.0;
  double p = 1.0;
};

struct EvaluationReport {
  PipelineConfig config;
  std::vector<SampleRecord> records;
  double accuracy = 0.0;
  RocCurve roc;
  ScoreDensities densities;
  KlDivergence kl;
  std::vector<FoldAudit> audits;

  [[nodiscard]] std::vector<bool> correctness() const;
};

/// Participant-level leave-one-out. Every participant must own exactly two
/// rows. Z-score, reducer and model are fitted on the training rows of each
/// fold only; folds run concurrently under Execution::parallel and the
/// report is assembled in participant order either way.
EvaluationReport run_loo(const FusedDataset& data, const PipelineConfig& config,
                         Execution exec = Execution::parallel);

/// Continuity-corrected McNemar test on paired per-sample correctness.
McNemarResult mcnemar(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b);

inline constexpr std::size_t kScoreBins = 20;
inline constexpr double kKlEpsilon = 1e-10;

KlDivergence kl_divergence(std::span<const double> scores_pos, std::span<const double> scores_neg);

/// Labels in {0,1}. Points run from (0,0) at threshold +inf to (1,1); equal
/// scores form a single step. AUC by the trapezoidal rule.
RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores);

ScoreDensities score_densities(std::span<const int> labels, std::span<const double> scores);

inline constexpr int kReportFormatVersion = 1;

nlohmann::json to_json(const EvaluationReport& report);
/// Restores config, records and metrics; ROC, densities and KL are
/// recomputed from the records.
EvaluationReport report_from_json(const nlohmann::json& j);

/// predictions.csv: participant_id,label,score,correct
std::string predictions_csv(const EvaluationReport& report);
/// roc.csv: threshold,fpr,tpr
std::string roc_csv(const RocCurve& roc);
/// densities.csv: bin_lo,bin_hi,p_phone,p_nophone
std::string densities_csv(const ScoreDensities& d);

}  // namespace phonesense
