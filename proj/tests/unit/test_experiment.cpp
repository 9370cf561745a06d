#include <gtest/gtest.h>

#include <sstream>

#include "phonesense/error.hpp"
#include "phonesense/experiment.hpp"
#include "phonesense/synthgen.hpp"
#include "support/test_support.hpp"

using namespace phonesense;
namespace fs = std::filesystem;

namespace {

template <class F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  return Error(ErrorCode::internal, "no error thrown");
}

EvaluationReport report_with(std::size_t n, std::size_t n_correct) {
  EvaluationReport r;
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord s;
    s.participant_id = "P" + std::to_string(i / 2);
    s.label = static_cast<int>((i / 2) % 2);
    s.anchor_s = 100.0 * static_cast<double>(i % 2);
    s.correct = i < n_correct;
    s.score = s.correct == (s.label == 1) ? 0.9 : 0.1;
    r.records.push_back(s);
  }
  r.accuracy = static_cast<double>(n_correct) / static_cast<double>(n);
  return r;
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

class GridTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = std::make_unique<testing_support::TempDir>("grid_data");
    generate_dataset(GeneratorPreset::strong(42), 5, 5, data_->path());
  }
  static void TearDownTestSuite() { data_.reset(); }

  ExperimentConfig config(const fs::path& out) const {
    ExperimentConfig c;
    c.data_dir = data_->path();
    c.out_dir = out;
    c.signal_sets = {"head_pose", "alpha"};
    c.models = {ModelSpec::svm(SvmKernel::linear)};
    return c;
  }

  static inline std::unique_ptr<testing_support::TempDir> data_;
};

}  // namespace

TEST(SignalSets, Resolve) {
  EXPECT_EQ(resolve_signal_set("all").channels.size(), 11u);
  EXPECT_EQ(resolve_signal_set("eeg").channels.size(), 7u);
  EXPECT_EQ(resolve_signal_set("eeg_hr").channels.size(), 8u);
  EXPECT_EQ(resolve_signal_set("head_pose").channels,
            (std::vector<ChannelId>{ChannelId::roll, ChannelId::yaw, ChannelId::pitch}));
  EXPECT_EQ(resolve_signal_set("theta").channels, (std::vector<ChannelId>{ChannelId::theta}));
  EXPECT_EQ(error_of([] { resolve_signal_set("eyes"); }).code(), ErrorCode::unknown_channel);
  EXPECT_EQ(standard_signal_sets().size(), 14u);
}

TEST(Config, ParsesFullSchema) {
  const auto c = parse_experiment_config(R"({
    "data_dir": "d", "out_dir": "o",
    "signal_sets": ["all", "head_pose"], "smoothing": [0, 20],
    "reductions": ["none", "kbest:40", "pca"], "models": ["rf", "svm_rbf"],
    "seed": 7, "match_activities": ["video2"]
  })");
  EXPECT_EQ(c.data_dir, "d");
  EXPECT_EQ(c.smoothing, (std::vector<int>{0, 20}));
  EXPECT_EQ(c.reductions[1], ReductionSpec::kbest(40));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(expand_grid(c).size(), 2u * 2 * 3 * 2);
  EXPECT_EQ(expand_grid(c)[1].id(), "all__s0__none__svm_rbf");
  EXPECT_EQ(expand_grid(c)[2].id(), "all__s0__kbest-40__rf");
}

TEST(Config, SyntaxErrorNamesLine) {
  const auto e = error_of([] { parse_experiment_config("{\n  \"data_dir\": \"d\",\n  oops\n}"); });
  EXPECT_EQ(e.code(), ErrorCode::config_error);
  EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
}

TEST(Config, FieldErrorsNameLineAndField) {
  const std::string text = "{\n  \"data_dir\": \"d\",\n  \"out_dir\": \"o\",\n  \"smoothing\": [0, 7]\n}";
  const auto e = error_of([&] { parse_experiment_config(text); });
  EXPECT_EQ(e.code(), ErrorCode::invalid_smoothing);
  EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("'smoothing'"), std::string::npos) << e.what();
  EXPECT_EQ(parse_experiment_config(text, true).smoothing, (std::vector<int>{0, 7}));

  const auto bad_model =
      error_of([] { parse_experiment_config(R"({"data_dir": "d", "out_dir": "o", "models": ["knn"]})"); });
  EXPECT_NE(std::string(bad_model.what()).find("'models'"), std::string::npos);
  EXPECT_EQ(bad_model.message().find("config_error"), std::string::npos);
}

TEST(Config, RejectsUnknownAndMissingFields) {
  EXPECT_EQ(error_of([] { parse_experiment_config(R"({"data_dir": "d", "out_dir": "o", "folds": 3})"); }).code(),
            ErrorCode::config_error);
  EXPECT_EQ(error_of([] { parse_experiment_config(R"({"out_dir": "o"})"); }).code(), ErrorCode::config_error);
  EXPECT_EQ(error_of([] {
              parse_experiment_config(R"({"data_dir": "d", "out_dir": "o", "signal_sets": ["eyes"]})");
            }).code(),
            ErrorCode::unknown_channel);
}

TEST(Compare, RelativeImprovement) {
  const auto a = report_with(100, 70), b = report_with(100, 76);
  EXPECT_NEAR(compare_reports(a, b).relative_improvement_pct, 8.57, 5e-3);
  const auto c = report_with(100, 87), d = report_with(100, 91);
  EXPECT_NEAR(compare_reports(c, d).relative_improvement_pct, 4.60, 5e-3);
  const auto self = compare_reports(a, a);
  EXPECT_EQ(self.relative_improvement_pct, 0.0);
  EXPECT_EQ(self.mcnemar.chi2, 0.0);
  EXPECT_EQ(self.mcnemar.p, 1.0);
}

TEST(Compare, SampleMismatch) {
  auto a = report_with(10, 5), b = report_with(10, 5);
  b.records[3].anchor_s = 42.0;
  EXPECT_EQ(error_of([&] { compare_reports(a, b); }).code(), ErrorCode::sample_mismatch);
  EXPECT_EQ(error_of([&] { compare_reports(a, report_with(12, 5)); }).code(), ErrorCode::sample_mismatch);
}

TEST_F(GridTest, RunsResumesAndForces) {
  testing_support::TempDir out("grid_out");
  auto cfg = config(out.path());
  std::vector<std::string> seen;
  GridOptions opts;
  opts.on_cell = [&](const CellOutcome& o) { seen.push_back(o.cell.id()); };
  const auto first = run_grid(cfg, opts);
  ASSERT_EQ(first.size(), 2u);
  EXPECT_EQ(seen, (std::vector<std::string>{"head_pose__s0__none__svm_linear", "alpha__s0__none__svm_linear"}));
  for (const auto& o : first) {
    EXPECT_TRUE(o.ok) << o.error;
    EXPECT_FALSE(o.resumed);
    EXPECT_TRUE(fs::exists(o.report_path));
  }
  const auto cell_bytes = testing_support::slurp(first[0].report_path);
  const auto summary = testing_support::slurp(out / "summary.csv");

  const auto second = run_grid(cfg);
  for (const auto& o : second) EXPECT_TRUE(o.resumed);
  EXPECT_EQ(testing_support::slurp(out / "summary.csv"), summary);

  GridOptions force;
  force.force = true;
  force.exec = Execution::serial;
  const auto third = run_grid(cfg, force);
  for (const auto& o : third) EXPECT_FALSE(o.resumed);
  EXPECT_EQ(testing_support::slurp(first[0].report_path), cell_bytes);
  EXPECT_EQ(testing_support::slurp(out / "summary.csv"), summary);
}

TEST_F(GridTest, SummaryMatchesCellReports) {
  testing_support::TempDir out("grid_sum");
  const auto outcomes = run_grid(config(out.path()));
  std::stringstream lines(testing_support::slurp(out / "summary.csv"));
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "rank,cell,signal_set,smoothing,reduction,model,accuracy,auc,kl_symmetric,status");
  std::size_t rows = 0;
  double last = 2.0;
  while (std::getline(lines, line)) {
    const auto f = csv_fields(line);
    ASSERT_EQ(f.size(), 10u);
    const auto report =
        report_from_json(nlohmann::json::parse(testing_support::slurp(out / ("cells/" + f[1] + ".json"))));
    EXPECT_EQ(std::stod(f[6]), report.accuracy);
    EXPECT_LE(report.accuracy, last);
    last = report.accuracy;
    EXPECT_EQ(f[0], std::to_string(++rows));
  }
  EXPECT_EQ(rows, outcomes.size());
}

TEST_F(GridTest, FailingCellIsRecorded) {
  testing_support::TempDir out("grid_fail");
  auto cfg = config(out.path());
  cfg.signal_sets = {"alpha"};
  cfg.reductions = {ReductionSpec::kbest(10), ReductionSpec::none()};
  cfg.match_activities = {"video2"};  // nophone sessions get one anchor only
  const auto outcomes = run_grid(cfg);
  ASSERT_EQ(outcomes.size(), 2u);
  for (const auto& o : outcomes) {
    EXPECT_FALSE(o.ok);
    EXPECT_FALSE(o.error.empty());
  }
  EXPECT_NE(testing_support::slurp(out / "summary.csv").find(",,,error: "), std::string::npos);
}

TEST_F(GridTest, ReportsInBothFormats) {
  testing_support::TempDir out("grid_rep"), csv("rep_csv"), js("rep_json"), empty("rep_empty");
  run_grid(config(out.path()));
  EXPECT_EQ(write_reports(out.path(), csv.path(), ReportFormat::csv), 2u);
  EXPECT_TRUE(fs::exists(csv / "summary.csv"));
  for (const char* f : {"roc.csv", "densities.csv", "predictions.csv"})
    EXPECT_TRUE(fs::exists(csv / ("alpha__s0__none__svm_linear/" + std::string(f)))) << f;
  EXPECT_EQ(write_reports(out.path(), js.path(), ReportFormat::json), 2u);
  const auto bundle = nlohmann::json::parse(testing_support::slurp(js / "report.json"));
  EXPECT_EQ(bundle["cells"].size(), 2u);
  EXPECT_EQ(bundle["cells"][0]["roc"][0]["threshold"], "inf");
  EXPECT_EQ(error_of([&] { write_reports(empty.path(), js.path(), ReportFormat::csv); }).code(),
            ErrorCode::no_results);
}

TEST_F(GridTest, BuildDatasetAndPipelineRoundTrip) {
  WindowPolicy policy;
  const auto data = build_dataset(data_->path(), resolve_signal_set("head_pose"), 5, policy);
  EXPECT_EQ(data.size(), 20u);
  EXPECT_EQ(data.dimension(), 193u);
  EXPECT_EQ(error_of([&] { build_dataset(data_->path(), resolve_signal_set("all"), 7, policy); }).code(),
            ErrorCode::invalid_smoothing);

  const auto p = train_pipeline(data, ReductionSpec::pca(0.9), ModelSpec::svm(SvmKernel::rbf));
  EXPECT_EQ(p.zscore.fitted_on, "all");
  const auto back = pipeline_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_EQ(back.signal_set, p.signal_set);
  EXPECT_EQ(back.score(data.features), p.score(data.features));
}
