#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "phonesense/execution.hpp"

namespace phonesense {

enum class SvmKernel { linear, rbf };

struct ModelSpec {
  enum class Kind { rf, svm, constant };

  Kind kind = Kind::rf;
  int n_trees = 250;
  SvmKernel kernel = SvmKernel::linear;
  double C = 1.0;
  /// Score returned by the constant baseline.
  double constant_score = 1.0;
  std::uint64_t seed = 42;

  static ModelSpec random_forest(int n_trees = 250, std::uint64_t seed = 42);
  static ModelSpec svm(SvmKernel kernel, double C = 1.0);
  static ModelSpec constant(double score);

  /// Accepts "rf", "rf:<trees>", "svm_linear", "svm_rbf" (optionally with
  /// ":<C>") and "constant:<score>".
  static ModelSpec parse(std::string_view text);
  [[nodiscard]] std::string to_string() const;
};

// ---------------------------------------------------------------- forest

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int count0 = 0;
  int count1 = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  /// Leaf majority class for one row; ties go to class 0.
  [[nodiscard]] int vote(const double* row, std::ptrdiff_t stride) const;
  [[nodiscard]] std::size_t depth() const;
};

struct RandomForest {
  std::vector<DecisionTree> trees;

  /// Fraction of trees voting class 1.
  [[nodiscard]] double score(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

/// Bootstrap + Gini trees over ceil(sqrt(D)) candidate features per node,
/// grown until pure or fewer than 2 samples. Tree t draws from its own
/// substream of `seed`, so the forest does not depend on scheduling.
RandomForest rf_train(const Eigen::MatrixXd& x, const std::vector<int>& labels, int n_trees,
                      std::uint64_t seed, Execution exec = Execution::parallel);

// ---------------------------------------------------------------- svm

struct SmoOptions {
  double tolerance = 1e-3;
  /// 0 selects the default cap of 10 * n * n iterations.
  std::size_t max_iterations = 0;
  /// Invoked every `checkpoint_every` iterations with the dual objective.
  std::function<void(std::size_t iteration, double dual_objective)> on_checkpoint;
  std::size_t checkpoint_every = 1;
};

struct SmoSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double dual_objective = 0.0;
};

/// Soft-margin dual by SMO with second-order working-set selection.
/// `kernel` is the n x n Gram matrix, labels are in {-1,+1}.
SmoSolution smo_solve(const Eigen::MatrixXd& kernel, const std::vector<int>& signed_labels,
                      double C, const SmoOptions& options = {});

struct PlattParams {
  double a = 0.0;
  double b = 0.0;
};

/// Newton fit with backtracking of P(y=1|f) = 1/(1+exp(a f + b)) on smoothed
/// targets t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2).
PlattParams platt_fit(const std::vector<double>& decision_values, const std::vector<int>& labels);
double platt_probability(const PlattParams& p, double decision_value);

struct SvmModel {
  SvmKernel kernel = SvmKernel::linear;
  double C = 1.0;
  double gamma = 0.0;
  Eigen::MatrixXd support_vectors;  // rows
  std::vector<double> coef;         // alpha_i * y_i
  double bias = 0.0;
  PlattParams platt;
  bool converged = true;
  std::size_t iterations = 0;

  [[nodiscard]] double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  [[nodiscard]] double score(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return platt_probability(platt, decision(x));
  }
};

/// gamma = 1 / (D * mean column variance), or 1 when the data has no variance.
double rbf_scale_gamma(const Eigen::MatrixXd& x);

SvmModel svm_train(const Eigen::MatrixXd& x, const std::vector<int>& labels, SvmKernel kernel,
                   double C = 1.0, const SmoOptions& options = {});

// ---------------------------------------------------------------- common

struct ConstantModel {
  double score = 1.0;
};

struct TrainedModel {
  ModelSpec spec;
  std::size_t input_dim = 0;
  std::string fitted_on;
  std::variant<RandomForest, SvmModel, ConstantModel> model;
};

/// Labels are {0,1}; both classes are required except for the constant model.
TrainedModel train_model(const ModelSpec& spec, const Eigen::MatrixXd& x,
                         const std::vector<int>& labels, std::string fitted_on = {},
                         Execution exec = Execution::parallel);

/// Probability-like score in [0,1]; the hard label is score >= 0.5.
double predict_score(const TrainedModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);
std::vector<double> predict_scores(const TrainedModel& model, const Eigen::MatrixXd& x);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

}  // namespace phonesense
