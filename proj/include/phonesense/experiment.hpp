#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "phonesense/classifiers.hpp"
#include "phonesense/dimreduce.hpp"
#include "phonesense/evaluation.hpp"
#include "phonesense/execution.hpp"
#include "phonesense/features.hpp"
#include "phonesense/session.hpp"

namespace phonesense {

struct NamedSignalSet {
  std::string name;
  std::vector<ChannelId> channels;
};

/// A single channel name, "eeg" (7), "eeg_hr" (8), "head_pose" (3) or "all" (11).
NamedSignalSet resolve_signal_set(std::string_view name);

/// The 11 single channels followed by eeg_hr, head_pose and all.
std::vector<std::string> standard_signal_sets();

struct ExperimentConfig {
  std::filesystem::path data_dir;
  std::vector<std::string> signal_sets{"all"};
  std::vector<int> smoothing{0};
  std::vector<ReductionSpec> reductions{ReductionSpec::none()};
  std::vector<ModelSpec> models{ModelSpec::random_forest()};
  std::uint64_t seed = 42;
  std::filesystem::path out_dir;
  std::vector<std::string> match_activities{"video2", "reading_code"};
};

/// JSON config. Errors carry the offending line and field name.
ExperimentConfig parse_experiment_config(std::string_view text, bool allow_custom_smoothing = false);
ExperimentConfig load_experiment_config(const std::filesystem::path& file,
                                        bool allow_custom_smoothing = false);

struct GridCell {
  std::string signal_set;
  int smoothing = 0;
  ReductionSpec reduction;
  ModelSpec model;

  /// File-name safe identity, e.g. "all__s0__none__rf".
  [[nodiscard]] std::string id() const;
};

/// Cartesian product in config order: signal set, smoothing, reduction, model.
std::vector<GridCell> expand_grid(const ExperimentConfig& config);

struct CellOutcome {
  GridCell cell;
  bool ok = false;
  bool resumed = false;
  double accuracy = 0.0;
  double auc = 0.0;
  double kl_symmetric = 0.0;
  std::string error;
  std::filesystem::path report_path;
};

struct GridOptions {
  bool force = false;
  bool allow_custom_smoothing = false;
  Execution exec = Execution::parallel;
  std::function<void(const CellOutcome&)> on_cell;
};

/// Runs every cell, writing out_dir/cells/<id>.json as it goes and
/// out_dir/summary.csv at the end. Existing cell reports are reused unless
/// options.force is set. A failing cell is recorded and the run continues.
std::vector<CellOutcome> run_grid(const ExperimentConfig& config, const GridOptions& options = {});

/// rank,cell,signal_set,smoothing,reduction,model,accuracy,auc,kl_symmetric,status
/// Sorted by accuracy (descending), then cell id; failed cells last.
std::string summary_csv(std::vector<CellOutcome> outcomes);

/// The same loading and windowing run_grid uses, for a single configuration.
FusedDataset build_dataset(const std::filesystem::path& data_dir, const NamedSignalSet& signals,
                           int smoothing, const WindowPolicy& policy, bool allow_custom_smoothing = false,
                           Execution exec = Execution::parallel);

struct Comparison {
  double accuracy_a = 0.0;
  double accuracy_b = 0.0;
  double relative_improvement_pct = 0.0;  // (b - a) / a * 100
  McNemarResult mcnemar;
};

/// Throws sample_mismatch unless both reports list the same
/// (participant_id, label, anchor) sequence.
Comparison compare_reports(const EvaluationReport& a, const EvaluationReport& b);

enum class ReportFormat { csv, json };

/// Reads every cells/*.json under results_dir and writes, under out_dir,
/// either summary.csv plus <cell>/roc.csv, densities.csv and predictions.csv
/// (csv) or a single report.json (json). Returns the number of cells.
std::size_t write_reports(const std::filesystem::path& results_dir, const std::filesystem::path& out_dir,
                          ReportFormat format);

/// z-score, reducer and model fitted on every row of a dataset; what the
/// `train` command saves and `predict` applies.
struct TrainedPipeline {
  std::vector<ChannelId> signal_set;
  ZScoreParams zscore;
  FittedReducer reducer;
  TrainedModel model;

  [[nodiscard]] std::vector<double> score(const Eigen::MatrixXd& features) const;
};

TrainedPipeline train_pipeline(const FusedDataset& data, const ReductionSpec& reduction, const ModelSpec& model,
                               Execution exec = Execution::parallel);

nlohmann::json to_json(const TrainedPipeline& pipeline);
TrainedPipeline pipeline_from_json(const nlohmann::json& j);

}  // namespace phonesense
