#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace phonesense {

struct ReductionSpec {
  enum class Kind { none, kbest, pca };

  Kind kind = Kind::none;
  std::size_t k = 0;             // kbest only
  double variance_target = 0.95;  // pca only

  static ReductionSpec none() { return {}; }
  static ReductionSpec kbest(std::size_t k) { return {Kind::kbest, k, 0.95}; }
  static ReductionSpec pca(double target = 0.95) { return {Kind::pca, 0, target}; }

  /// Accepts "none", "kbest:<k>", "pca" and "pca:<target>".
  static ReductionSpec parse(std::string_view text);
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const ReductionSpec&, const ReductionSpec&) = default;
};

/// k values searched by the experiment grid; clipped to D at fit time.
inline constexpr std::size_t kKBestGrid[] = {10, 20, 40, 80, 120, 250};

/// A reducer fitted on one training fold. Immutable after fit.
struct FittedReducer {
  ReductionSpec spec;
  std::size_t input_dim = 0;
  std::string fitted_on;

  std::vector<std::size_t> selected;  // kbest: strictly increasing column indices

  Eigen::VectorXd column_means;              // pca
  Eigen::MatrixXd components;                // pca: input_dim x m, orthonormal columns
  std::vector<double> explained_variance_ratio;  // pca: one per retained component

  [[nodiscard]] std::size_t output_dim() const noexcept;
  [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// One-way ANOVA F statistic of each column between the two label groups.
/// Zero-variance columns score 0; a column with between-group variance but no
/// within-group variance scores +infinity.
std::vector<double> anova_f_scores(const Eigen::MatrixXd& x, const std::vector<int>& labels);

FittedReducer kbest_fit(const Eigen::MatrixXd& x, const std::vector<int>& labels, std::size_t k,
                        std::string fitted_on = {});

/// Centers by training means and keeps the smallest leading set of principal
/// axes whose cumulative explained-variance ratio reaches the target. Each
/// axis is sign-fixed so its largest-magnitude coordinate is positive.
FittedReducer pca_fit(const Eigen::MatrixXd& x, double variance_target = 0.95,
                      std::string fitted_on = {});

/// Dispatches on spec.kind. kbest's k is clipped to the number of columns.
FittedReducer reducer_fit(const ReductionSpec& spec, const Eigen::MatrixXd& x,
                          const std::vector<int>& labels, std::string fitted_on = {});

nlohmann::json to_json(const FittedReducer& r);
FittedReducer reducer_from_json(const nlohmann::json& j);

}  // namespace phonesense
