#include "phonesense/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <set>

#include "phonesense/error.hpp"
#include "phonesense/preprocess.hpp"
#include "text_io.hpp"

namespace phonesense {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<ChannelId, 7> kEeg{ChannelId::attention, ChannelId::meditation, ChannelId::alpha,
                                        ChannelId::beta,      ChannelId::gamma,      ChannelId::delta,
                                        ChannelId::theta};

std::size_t line_at(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

std::size_t line_of_field(std::string_view text, std::string_view field) {
  const auto pos = text.find("\"" + std::string(field) + "\"");
  return pos == std::string_view::npos ? 0 : line_at(text, pos);
}

[[noreturn]] void field_error(std::string_view text, std::string_view field, const std::string& what,
                              ErrorCode code = ErrorCode::config_error) {
  const auto line = line_of_field(text, field);
  throw Error(code, "config line " + std::to_string(line) + ", field '" + std::string(field) + "': " + what);
}

template <class T, class F>
std::vector<T> parse_list(std::string_view text, const json& root, const char* field, F&& convert) {
  const auto& node = root.at(field);
  if (!node.is_array() || node.empty()) field_error(text, field, "expected a non-empty array");
  std::vector<T> out;
  for (const auto& item : node) {
    try {
      out.push_back(convert(item));
    } catch (const Error& e) {
      field_error(text, field, e.message(), e.code());
    } catch (const json::exception& e) {
      field_error(text, field, e.what());
    }
  }
  return out;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ':', '-');
  return s;
}

json read_json_file(const fs::path& file) {
  try {
    return json::parse(detail::read_file(file));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, file.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& file, const json& j) { detail::write_file(file, j.dump(2) + "\n"); }

GridCell cell_of(const PipelineConfig& c) { return {c.signal_set, c.smoothing, c.reduction, c.model}; }

CellOutcome outcome_of(const GridCell& cell, const EvaluationReport& r, fs::path path) {
  CellOutcome o;
  o.cell = cell;
  o.ok = true;
  o.accuracy = r.accuracy;
  o.auc = r.roc.auc;
  o.kl_symmetric = r.kl.symmetric;
  o.report_path = std::move(path);
  return o;
}

std::vector<fs::path> report_files(const fs::path& results_dir) {
  const fs::path dir = fs::is_directory(results_dir / "cells") ? results_dir / "cells" : results_dir;
  std::vector<fs::path> files;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

NamedSignalSet resolve_signal_set(std::string_view name) {
  NamedSignalSet set{std::string(name), {}};
  if (name == "eeg") {
    set.channels.assign(kEeg.begin(), kEeg.end());
  } else if (name == "eeg_hr") {
    set.channels.assign(kEeg.begin(), kEeg.end());
    set.channels.push_back(ChannelId::heart_rate);
  } else if (name == "head_pose") {
    set.channels = {ChannelId::roll, ChannelId::yaw, ChannelId::pitch};
  } else if (name == "all") {
    set.channels.assign(kAllChannels.begin(), kAllChannels.end());
  } else if (const auto c = parse_channel(name)) {
    set.channels = {*c};
  } else {
    throw Error(ErrorCode::unknown_channel, "unknown signal set '" + std::string(name) + "'");
  }
  return set;
}

std::vector<std::string> standard_signal_sets() {
  std::vector<std::string> out;
  for (auto c : kAllChannels) out.emplace_back(channel_name(c));
  out.insert(out.end(), {"eeg_hr", "head_pose", "all"});
  return out;
}

ExperimentConfig parse_experiment_config(std::string_view text, bool allow_custom_smoothing) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::config_error,
                "config line " + std::to_string(line_at(text, e.byte == 0 ? 0 : e.byte - 1)) + ": " + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::config_error, "config line 1: expected a JSON object");

  static const std::set<std::string> known{"data_dir", "signal_sets", "smoothing", "reductions",
                                           "models",   "seed",        "out_dir",   "match_activities"};
  for (const auto& [key, value] : root.items())
    if (!known.count(key)) field_error(text, key, "unknown field");

  ExperimentConfig cfg;
  for (const char* field : {"data_dir", "out_dir"}) {
    if (!root.contains(field)) throw Error(ErrorCode::config_error, std::string("config: missing field '") + field + "'");
    if (!root[field].is_string() || root[field].get<std::string>().empty())
      field_error(text, field, "expected a non-empty string");
  }
  cfg.data_dir = root["data_dir"].get<std::string>();
  cfg.out_dir = root["out_dir"].get<std::string>();

  if (root.contains("signal_sets"))
    cfg.signal_sets = parse_list<std::string>(text, root, "signal_sets", [](const json& v) {
      const auto name = v.get<std::string>();
      resolve_signal_set(name);
      return name;
    });
  if (root.contains("smoothing"))
    cfg.smoothing = parse_list<int>(text, root, "smoothing", [&](const json& v) {
      if (!v.is_number_integer()) throw Error(ErrorCode::config_error, "expected integers");
      return SmoothingSpec::checked(v.get<int>(), allow_custom_smoothing).window_s;
    });
  if (root.contains("reductions"))
    cfg.reductions = parse_list<ReductionSpec>(
        text, root, "reductions", [](const json& v) { return ReductionSpec::parse(v.get<std::string>()); });
  if (root.contains("models"))
    cfg.models = parse_list<ModelSpec>(text, root, "models",
                                       [](const json& v) { return ModelSpec::parse(v.get<std::string>()); });
  if (root.contains("match_activities"))
    cfg.match_activities = parse_list<std::string>(text, root, "match_activities",
                                                   [](const json& v) { return v.get<std::string>(); });
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) field_error(text, "seed", "expected a non-negative integer");
    cfg.seed = root["seed"].get<std::uint64_t>();
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& file, bool allow_custom_smoothing) {
  if (!fs::exists(file)) throw Error(ErrorCode::io_failure, "no such config: " + file.string());
  try {
    return parse_experiment_config(detail::read_file(file), allow_custom_smoothing);
  } catch (const Error& e) {
    throw Error(e.code(), file.filename().string() + ": " + e.message());
  }
}

std::string GridCell::id() const {
  return signal_set + "__s" + std::to_string(smoothing) + "__" + sanitize(reduction.to_string()) + "__" +
         sanitize(model.to_string());
}

std::vector<GridCell> expand_grid(const ExperimentConfig& config) {
  std::vector<GridCell> cells;
  for (const auto& s : config.signal_sets)
    for (int w : config.smoothing)
      for (const auto& r : config.reductions)
        for (const auto& m : config.models) cells.push_back({s, w, r, m});
  return cells;
}

FusedDataset build_dataset(const fs::path& data_dir, const NamedSignalSet& signals, int smoothing,
                           const WindowPolicy& policy, bool allow_custom_smoothing, Execution exec) {
  const auto sessions = load_sessions(data_dir);
  if (sessions.empty()) throw Error(ErrorCode::empty_input, "no sessions under " + data_dir.string());
  const auto spec = SmoothingSpec::checked(smoothing, allow_custom_smoothing);
  const auto windows = build_windows(sessions, spec, policy, exec);
  return FeatureTable::build(windows, exec).assemble(signals.channels);
}

std::vector<CellOutcome> run_grid(const ExperimentConfig& config, const GridOptions& options) {
  const auto cells = expand_grid(config);
  const fs::path cell_dir = config.out_dir / "cells";
  WindowPolicy policy;
  policy.match_activities = config.match_activities;
  policy.seed = config.seed;

  std::vector<PipelineConfig> pipelines;
  for (const auto& c : cells) {
    PipelineConfig p;
    p.signal_set = c.signal_set;
    p.smoothing = c.smoothing;
    p.reduction = c.reduction;
    p.model = c.model;
    p.seed = config.seed;
    pipelines.push_back(std::move(p));
  }

  std::vector<CellOutcome> outcomes(cells.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const fs::path path = cell_dir / (cells[i].id() + ".json");
    outcomes[i].cell = cells[i];
    outcomes[i].report_path = path;
    if (!options.force && fs::exists(path)) {
      try {
        const auto j = read_json_file(path);
        if (j.at("fingerprint").get<std::string>() == pipelines[i].fingerprint()) {
          const auto r = report_from_json(j);
          outcomes[i] = outcome_of(cells[i], r, path);
          outcomes[i].resumed = true;
          continue;
        }
      } catch (const std::exception&) {
        // unreadable or stale; recompute
      }
    }
    todo.push_back(i);
  }

  if (!todo.empty()) {
    const auto sessions = load_sessions(config.data_dir);
    if (sessions.empty()) throw Error(ErrorCode::empty_input, "no sessions under " + config.data_dir.string());

    std::map<int, FeatureTable> tables;
    std::map<int, std::string> table_errors;
    for (auto i : todo) {
      const int w = cells[i].smoothing;
      if (tables.count(w) || table_errors.count(w)) continue;
      try {
        const auto spec = SmoothingSpec::checked(w, options.allow_custom_smoothing);
        tables.emplace(w, FeatureTable::build(build_windows(sessions, spec, policy, options.exec), options.exec));
      } catch (const Error& e) {
        table_errors.emplace(w, e.what());
      }
    }

    auto run_cell = [&](std::size_t i) {
      auto& out = outcomes[i];
      const int w = cells[i].smoothing;
      if (const auto it = table_errors.find(w); it != table_errors.end()) {
        out.error = it->second;
        return;
      }
      try {
        const auto data = tables.at(w).assemble(resolve_signal_set(cells[i].signal_set).channels);
        const auto report = run_loo(data, pipelines[i], Execution::serial);
        write_json_file(out.report_path, to_json(report));
        out = outcome_of(cells[i], report, out.report_path);
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
      }
    };

    const auto n = static_cast<long>(todo.size());
    if (options.exec == Execution::serial) {
      for (long k = 0; k < n; ++k) run_cell(todo[static_cast<std::size_t>(k)]);
    } else {
#pragma omp parallel for schedule(dynamic)
      for (long k = 0; k < n; ++k) run_cell(todo[static_cast<std::size_t>(k)]);
    }
  }

  if (options.on_cell)
    for (const auto& o : outcomes) options.on_cell(o);
  detail::write_file(config.out_dir / "summary.csv", summary_csv(outcomes));
  return outcomes;
}

std::string summary_csv(std::vector<CellOutcome> outcomes) {
  std::stable_sort(outcomes.begin(), outcomes.end(), [](const CellOutcome& a, const CellOutcome& b) {
    if (a.ok != b.ok) return a.ok;
    if (a.ok && a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    return a.cell.id() < b.cell.id();
  });
  std::string out = "rank,cell,signal_set,smoothing,reduction,model,accuracy,auc,kl_symmetric,status\n";
  std::size_t rank = 0;
  for (const auto& o : outcomes) {
    out += std::to_string(++rank) + ',' + o.cell.id() + ',' + o.cell.signal_set + ',' +
           std::to_string(o.cell.smoothing) + ',' + o.cell.reduction.to_string() + ',' + o.cell.model.to_string() + ',';
    if (o.ok) {
      out += detail::format_double(o.accuracy) + ',' + detail::format_double(o.auc) + ',' +
             detail::format_double(o.kl_symmetric) + ",ok\n";
    } else {
      std::string why = o.error;
      std::replace(why.begin(), why.end(), ',', ';');
      std::replace(why.begin(), why.end(), '\n', ' ');
      out += ",,,error: " + why + '\n';
    }
  }
  return out;
}

Comparison compare_reports(const EvaluationReport& a, const EvaluationReport& b) {
  if (a.records.size() != b.records.size())
    throw Error(ErrorCode::sample_mismatch, "reports cover " + std::to_string(a.records.size()) + " and " +
                                                std::to_string(b.records.size()) + " samples");
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.participant_id != y.participant_id || x.label != y.label || x.anchor_s != y.anchor_s)
      throw Error(ErrorCode::sample_mismatch, "sample " + std::to_string(i) + " differs: " + x.participant_id +
                                                  " vs " + y.participant_id);
  }
  Comparison c;
  c.accuracy_a = a.accuracy;
  c.accuracy_b = b.accuracy;
  c.relative_improvement_pct = a.accuracy == 0.0 ? 0.0 : (b.accuracy - a.accuracy) / a.accuracy * 100.0;
  c.mcnemar = mcnemar(a.correctness(), b.correctness());
  return c;
}

std::size_t write_reports(const fs::path& results_dir, const fs::path& out_dir, ReportFormat format) {
  const auto files = report_files(results_dir);
  if (files.empty()) throw Error(ErrorCode::no_results, "no cell reports under " + results_dir.string());

  std::vector<CellOutcome> outcomes;
  json bundle_cells = json::array();
  for (const auto& file : files) {
    const auto report = report_from_json(read_json_file(file));
    const GridCell cell = cell_of(report.config);
    outcomes.push_back(outcome_of(cell, report, file));
    if (format == ReportFormat::csv) {
      const fs::path dir = out_dir / cell.id();
      detail::write_file(dir / "roc.csv", roc_csv(report.roc));
      detail::write_file(dir / "densities.csv", densities_csv(report.densities));
      detail::write_file(dir / "predictions.csv", predictions_csv(report));
    } else {
      json roc = json::array();
      for (const auto& p : report.roc.points)
        roc.push_back({{"threshold", std::isinf(p.threshold) ? json("inf") : json(p.threshold)},
                       {"fpr", p.fpr},
                       {"tpr", p.tpr}});
      const auto& d = report.densities;
      bundle_cells.push_back({{"cell", cell.id()},
                              {"fingerprint", report.config.fingerprint()},
                              {"config", report.config.to_json()},
                              {"accuracy", report.accuracy},
                              {"auc", report.roc.auc},
                              {"kl", {{"forward", report.kl.forward}, {"reverse", report.kl.reverse},
                                      {"symmetric", report.kl.symmetric}}},
                              {"roc", roc},
                              {"densities", {{"bin_lo", d.bin_lo}, {"bin_hi", d.bin_hi},
                                             {"p_phone", d.phone}, {"p_nophone", d.nophone}}}});
    }
  }
  if (format == ReportFormat::csv) {
    detail::write_file(out_dir / "summary.csv", summary_csv(outcomes));
  } else {
    write_json_file(out_dir / "report.json",
                    {{"format", "phonesense.report_bundle"}, {"version", kReportFormatVersion}, {"cells", bundle_cells}});
  }
  return files.size();
}

std::vector<double> TrainedPipeline::score(const Eigen::MatrixXd& features) const {
  return predict_scores(model, reducer.apply(zscore.apply(features)));
}

TrainedPipeline train_pipeline(const FusedDataset& data, const ReductionSpec& reduction, const ModelSpec& model,
                               Execution exec) {
  const std::string fitted_on = "all";
  TrainedPipeline p;
  p.signal_set = data.signal_set;
  p.zscore = zscore_fit(data.features, fitted_on);
  const Eigen::MatrixXd z = p.zscore.apply(data.features);
  p.reducer = reducer_fit(reduction, z, data.labels, fitted_on);
  p.model = train_model(model, p.reducer.apply(z), data.labels, fitted_on, exec);
  return p;
}

json to_json(const TrainedPipeline& p) {
  std::vector<std::string> channels;
  for (auto c : p.signal_set) channels.emplace_back(channel_name(c));
  const std::vector<double> means(p.zscore.means.data(), p.zscore.means.data() + p.zscore.means.size());
  const std::vector<double> stds(p.zscore.stds.data(), p.zscore.stds.data() + p.zscore.stds.size());
  return {{"format", "phonesense.pipeline"},
          {"version", 1},
          {"signal_set", channels},
          {"zscore", {{"means", means}, {"stds", stds}, {"fitted_on", p.zscore.fitted_on}}},
          {"reducer", to_json(p.reducer)},
          {"model", to_json(p.model)}};
}

TrainedPipeline pipeline_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "phonesense.pipeline")
      throw Error(ErrorCode::config_error, "not a pipeline artifact");
    TrainedPipeline p;
    for (const auto& name : j.at("signal_set")) {
      const auto c = parse_channel(name.get<std::string>());
      if (!c) throw Error(ErrorCode::unknown_channel, name.get<std::string>());
      p.signal_set.push_back(*c);
    }
    const auto& z = j.at("zscore");
    const auto means = z.at("means").get<std::vector<double>>();
    const auto stds = z.at("stds").get<std::vector<double>>();
    if (means.size() != stds.size()) throw Error(ErrorCode::config_error, "zscore means/stds differ in length");
    p.zscore.means = Eigen::Map<const Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
    p.zscore.stds = Eigen::Map<const Eigen::VectorXd>(stds.data(), static_cast<Eigen::Index>(stds.size()));
    p.zscore.fitted_on = z.at("fitted_on").get<std::string>();
    p.reducer = reducer_from_json(j.at("reducer"));
    p.model = model_from_json(j.at("model"));
    if (p.reducer.input_dim != means.size() || p.reducer.output_dim() != p.model.input_dim)
      throw Error(ErrorCode::config_error, "pipeline stages disagree on dimensions");
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("pipeline artifact: ") + e.what());
  }
}

}  // namespace phonesense
