// phonesense command-line front end.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 internal.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "phonesense/error.hpp"
#include "phonesense/experiment.hpp"
#include "phonesense/features.hpp"
#include "phonesense/preprocess.hpp"
#include "phonesense/synthgen.hpp"

namespace fs = std::filesystem;
using namespace phonesense;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::config_error:
    case ErrorCode::invalid_smoothing:
    case ErrorCode::unknown_channel:
    case ErrorCode::k_out_of_range:
      return kExitUsage;
    case ErrorCode::internal:
      return kExitInternal;
    default:
      return kExitData;
  }
}

// Explicit --seed wins; otherwise PHONESENSE_SEED; otherwise the fallback.
std::uint64_t effective_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PHONESENSE_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::config_error, std::string("PHONESENSE_SEED is not an integer: ") + env);
  }
  return fallback;
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + file.string());
}

nlohmann::json read_json(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, file.string() + ": " + e.what());
  }
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

Execution exec_of(bool serial) { return serial ? Execution::serial : Execution::parallel; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phone-usage detection from multimodal biometric sessions"};
  app.require_subcommand(1);
  app.fallthrough();
  bool serial = false;
  app.add_flag("--serial", serial, "Run every kernel on the serial reference path");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic session dataset");
  std::string preset_name = "strong";
  std::size_t n_phone = 33, n_nophone = 33;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out;
  synth->add_option("--preset", preset_name, "strong, weak or null")->capture_default_str();
  synth->add_option("--phone", n_phone, "Phone-group sessions")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--nophone", n_nophone, "No-phone sessions")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Generator seed (default 42)");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // extract
  auto* extract = app.add_subcommand("extract", "Window sessions and export the fused feature CSV");
  std::string ex_data, ex_out, ex_signals = "all";
  int ex_smoothing = 0;
  bool ex_dump = false, ex_custom = false;
  std::optional<std::uint64_t> ex_seed;
  extract->add_option("--data", ex_data, "Session root directory")->required();
  extract->add_option("--signals", ex_signals, "Signal set")->capture_default_str();
  extract->add_option("--smoothing", ex_smoothing, "Trailing window in seconds")->capture_default_str();
  extract->add_flag("--allow-custom-smoothing", ex_custom, "Accept smoothing values off the grid");
  extract->add_flag("--dump-windows", ex_dump, "Also write windows.csv");
  extract->add_option("--seed", ex_seed, "Anchor seed for no-phone sessions (default 42)");
  extract->add_option("--out", ex_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Fit a pipeline on a feature CSV");
  std::string tr_features, tr_out, tr_reduction = "none", tr_model = "rf";
  std::optional<std::uint64_t> tr_seed;
  train->add_option("--features", tr_features, "Feature CSV from extract")->required();
  train->add_option("--reduction", tr_reduction, "none, kbest:<k>, pca[:<target>]")->capture_default_str();
  train->add_option("--model", tr_model, "rf[:trees], svm_linear[:C], svm_rbf[:C], constant:<p>")
      ->capture_default_str();
  train->add_option("--seed", tr_seed, "Model seed (default 42)");
  train->add_option("--out", tr_out, "Output directory")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Participant-level leave-one-out for one configuration");
  std::string ev_data, ev_features, ev_out, ev_signals = "all", ev_reduction = "none", ev_model = "rf";
  int ev_smoothing = 0;
  bool ev_custom = false;
  std::optional<std::uint64_t> ev_seed;
  auto* ev_data_opt = evaluate->add_option("--data", ev_data, "Session root directory");
  auto* ev_feat_opt = evaluate->add_option("--features", ev_features, "Feature CSV instead of sessions");
  ev_data_opt->excludes(ev_feat_opt);
  evaluate->add_option("--signals", ev_signals, "Signal set")->capture_default_str();
  evaluate->add_option("--smoothing", ev_smoothing, "Trailing window in seconds")->capture_default_str();
  evaluate->add_flag("--allow-custom-smoothing", ev_custom, "Accept smoothing values off the grid");
  evaluate->add_option("--reduction", ev_reduction, "none, kbest:<k>, pca[:<target>]")->capture_default_str();
  evaluate->add_option("--model", ev_model, "Model spec")->capture_default_str();
  evaluate->add_option("--seed", ev_seed, "Seed (default 42)");
  evaluate->add_option("--out", ev_out, "Output directory")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "Score a feature CSV with a trained pipeline");
  std::string pr_pipeline, pr_features, pr_out;
  predict->add_option("--pipeline", pr_pipeline, "pipeline.json from train")->required();
  predict->add_option("--features", pr_features, "Feature CSV")->required();
  predict->add_option("--out", pr_out, "Output directory")->required();

  // compare
  auto* compare = app.add_subcommand("compare", "Relative improvement and McNemar test between two reports");
  std::string cmp_a, cmp_b, cmp_out;
  compare->add_option("report_a", cmp_a, "Baseline report JSON")->required();
  compare->add_option("report_b", cmp_b, "Candidate report JSON")->required();
  compare->add_option("--out", cmp_out, "Also write comparison.json here");

  // grid
  auto* grid = app.add_subcommand("grid", "Run an experiment grid from a config file");
  std::string gr_config, gr_out;
  bool gr_force = false, gr_custom = false;
  grid->add_option("config", gr_config, "Grid config JSON")->required();
  grid->add_option("--out", gr_out, "Override the config's out_dir");
  grid->add_flag("--force", gr_force, "Recompute cells that already have reports");
  grid->add_flag("--allow-custom-smoothing", gr_custom, "Accept smoothing values off the grid");

  // report
  auto* report = app.add_subcommand("report", "Export plot-ready files from grid results");
  std::string rp_results, rp_out, rp_format = "csv";
  report->add_option("--results", rp_results, "Grid output directory")->required();
  report->add_option("--format", rp_format, "csv or json")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--out", rp_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const Execution exec = exec_of(serial);

    if (*synth) {
      const auto preset = GeneratorPreset::named(preset_name, effective_seed(synth_seed, 42));
      generate_dataset(preset, n_phone, n_nophone, synth_out, exec);
      std::cout << (fs::path(synth_out) / "manifest.json").string() << "\n";
    } else if (*extract) {
      WindowPolicy policy;
      policy.seed = effective_seed(ex_seed, 42);
      const auto sessions = load_sessions(ex_data);
      if (sessions.empty()) throw Error(ErrorCode::empty_input, "no sessions under " + ex_data);
      const auto spec = SmoothingSpec::checked(ex_smoothing, ex_custom);
      const auto windows = build_windows(sessions, spec, policy, exec);
      const auto data = FeatureTable::build(windows, exec).assemble(resolve_signal_set(ex_signals).channels);
      const fs::path out = ex_out;
      write_feature_csv(data, out / "features.csv");
      if (ex_dump) write_window_dump(windows, out / "windows.csv");
      std::cout << data.size() << " samples, " << data.dimension() << " features -> "
                << (out / "features.csv").string() << "\n";
    } else if (*train) {
      const auto data = read_feature_csv(tr_features);
      ModelSpec model = ModelSpec::parse(tr_model);
      model.seed = effective_seed(tr_seed, 42);
      const auto pipeline = train_pipeline(data, ReductionSpec::parse(tr_reduction), model, exec);
      write_text(fs::path(tr_out) / "pipeline.json", to_json(pipeline).dump(2) + "\n");
      std::cout << (fs::path(tr_out) / "pipeline.json").string() << "\n";
    } else if (*evaluate) {
      if (ev_data.empty() == ev_features.empty())
        throw Error(ErrorCode::config_error, "give exactly one of --data or --features");
      PipelineConfig cfg;
      cfg.signal_set = ev_signals;
      cfg.smoothing = ev_smoothing;
      cfg.reduction = ReductionSpec::parse(ev_reduction);
      cfg.model = ModelSpec::parse(ev_model);
      cfg.seed = effective_seed(ev_seed, 42);
      FusedDataset data;
      if (!ev_data.empty()) {
        WindowPolicy policy;
        policy.seed = cfg.seed;
        data = build_dataset(ev_data, resolve_signal_set(ev_signals), ev_smoothing, policy, ev_custom, exec);
      } else {
        data = read_feature_csv(ev_features);
      }
      const auto rep = run_loo(data, cfg, exec);
      const fs::path out = ev_out;
      write_text(out / "report.json", to_json(rep).dump(2) + "\n");
      write_text(out / "predictions.csv", predictions_csv(rep));
      write_text(out / "roc.csv", roc_csv(rep.roc));
      write_text(out / "densities.csv", densities_csv(rep.densities));
      std::cout << cfg.fingerprint() << "\naccuracy " << fixed(rep.accuracy, 4) << "  auc "
                << fixed(rep.roc.auc, 4) << "  kl " << fixed(rep.kl.symmetric, 4) << "\n";
    } else if (*predict) {
      const auto pipeline = pipeline_from_json(read_json(pr_pipeline));
      const auto data = read_feature_csv(pr_features);
      if (data.dimension() != static_cast<std::size_t>(pipeline.zscore.means.size()))
        throw Error(ErrorCode::dimension_mismatch, "pipeline expects " + std::to_string(pipeline.zscore.means.size()) +
                                                       " features, CSV has " + std::to_string(data.dimension()));
      const auto scores = pipeline.score(data.features);
      std::string csv = "participant_id,score,label_hat\n";
      for (std::size_t i = 0; i < scores.size(); ++i) {
        std::ostringstream line;
        line.precision(17);
        line << data.participant_ids[i] << ',' << scores[i] << ',' << (scores[i] >= 0.5 ? 1 : 0) << '\n';
        csv += line.str();
      }
      write_text(fs::path(pr_out) / "predictions.csv", csv);
      std::cout << (fs::path(pr_out) / "predictions.csv").string() << "\n";
    } else if (*compare) {
      const auto a = report_from_json(read_json(cmp_a));
      const auto b = report_from_json(read_json(cmp_b));
      const auto c = compare_reports(a, b);
      std::cout << "accuracy A " << fixed(c.accuracy_a, 4) << "  B " << fixed(c.accuracy_b, 4) << "\n"
                << "relative improvement " << (c.relative_improvement_pct >= 0 ? "+" : "")
                << fixed(c.relative_improvement_pct, 2) << " %\n"
                << "mcnemar b=" << c.mcnemar.b << " c=" << c.mcnemar.c << " chi2=" << fixed(c.mcnemar.chi2, 4)
                << " p=" << fixed(c.mcnemar.p, 4) << "\n";
      if (!cmp_out.empty()) {
        nlohmann::json j = {{"report_a", a.config.fingerprint()},
                            {"report_b", b.config.fingerprint()},
                            {"accuracy_a", c.accuracy_a},
                            {"accuracy_b", c.accuracy_b},
                            {"relative_improvement_pct", c.relative_improvement_pct},
                            {"mcnemar", {{"b", c.mcnemar.b}, {"c", c.mcnemar.c},
                                         {"chi2", c.mcnemar.chi2}, {"p", c.mcnemar.p}}}};
        write_text(fs::path(cmp_out) / "comparison.json", j.dump(2) + "\n");
      }
    } else if (*grid) {
      auto cfg = load_experiment_config(gr_config, gr_custom);
      cfg.seed = effective_seed(std::nullopt, cfg.seed);
      if (!gr_out.empty()) cfg.out_dir = gr_out;
      GridOptions opts;
      opts.force = gr_force;
      opts.allow_custom_smoothing = gr_custom;
      opts.exec = exec;
      std::size_t failed = 0;
      opts.on_cell = [&](const CellOutcome& o) {
        if (o.ok) {
          std::cout << o.cell.id() << "  " << fixed(o.accuracy, 4) << (o.resumed ? "  (cached)" : "") << "\n";
        } else {
          ++failed;
          std::cout << o.cell.id() << "  FAILED  " << o.error << "\n";
        }
      };
      const auto outcomes = run_grid(cfg, opts);
      std::cout << outcomes.size() - failed << "/" << outcomes.size() << " cells ok; summary "
                << (cfg.out_dir / "summary.csv").string() << "\n";
      if (failed == outcomes.size()) return kExitData;
    } else if (*report) {
      const auto n = write_reports(rp_results, rp_out, rp_format == "json" ? ReportFormat::json : ReportFormat::csv);
      std::cout << n << " cells -> " << rp_out << "\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
