#include "phonesense/dimreduce.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/SVD>

#include "phonesense/error.hpp"
#include "text_io.hpp"

namespace phonesense {

ReductionSpec ReductionSpec::parse(std::string_view text) {
  if (text == "none") return none();
  if (text == "pca") return pca();
  if (text.starts_with("pca:")) {
    const auto t = detail::parse_double(text.substr(4));
    if (!t || !(*t > 0.0) || *t > 1.0)
      throw Error(ErrorCode::config_error, "pca target must be in (0,1]: " + std::string(text));
    return pca(*t);
  }
  if (text.starts_with("kbest:")) {
    const auto digits = text.substr(6);
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || k == 0)
      throw Error(ErrorCode::config_error, "kbest needs a positive integer: " + std::string(text));
    return kbest(k);
  }
  throw Error(ErrorCode::config_error, "unknown reduction '" + std::string(text) + "'");
}

std::string ReductionSpec::to_string() const {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::kbest: return "kbest:" + std::to_string(k);
    case Kind::pca: return "pca:" + detail::format_double(variance_target);
  }
  return "none";
}

std::size_t FittedReducer::output_dim() const noexcept {
  switch (spec.kind) {
    case ReductionSpec::Kind::none: return input_dim;
    case ReductionSpec::Kind::kbest: return selected.size();
    case ReductionSpec::Kind::pca: return static_cast<std::size_t>(components.cols());
  }
  return input_dim;
}

Eigen::MatrixXd FittedReducer::apply(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim)
    throw Error(ErrorCode::dimension_mismatch, "reducer expects " + std::to_string(input_dim) +
                                                   " columns, got " + std::to_string(x.cols()));
  switch (spec.kind) {
    case ReductionSpec::Kind::none: return x;
    case ReductionSpec::Kind::kbest: {
      Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(selected.size()));
      for (std::size_t i = 0; i < selected.size(); ++i)
        out.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(selected[i]));
      return out;
    }
    case ReductionSpec::Kind::pca:
      return (x.rowwise() - column_means.transpose()) * components;
  }
  return x;
}

std::vector<double> anova_f_scores(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw Error(ErrorCode::dimension_mismatch, "labels and rows differ");
  const auto n1 = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto n0 = static_cast<double>(labels.size()) - n1;
  if (n1 == 0 || n0 == 0) throw Error(ErrorCode::single_class, "F-test needs both classes");
  const double n = n0 + n1;

  std::vector<double> scores(static_cast<std::size_t>(x.cols()), 0.0);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double sum0 = 0.0, sum1 = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      (labels[static_cast<std::size_t>(r)] == 1 ? sum1 : sum0) += x(r, c);
    const double mean0 = sum0 / n0;
    const double mean1 = sum1 / n1;
    const double grand = (sum0 + sum1) / n;
    double within = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double m = labels[static_cast<std::size_t>(r)] == 1 ? mean1 : mean0;
      within += (x(r, c) - m) * (x(r, c) - m);
    }
    const double between = n0 * (mean0 - grand) * (mean0 - grand) + n1 * (mean1 - grand) * (mean1 - grand);
    const double total = between + within;
    double f = 0.0;
    if (total > 0.0 && std::isfinite(total)) {
      // Relative to the column's overall spread, a numerically zero within-group
      // term means the column separates the classes perfectly.
      if (within <= total * 1e-15) {
        f = between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      } else {
        f = between / (within / (n - 2.0));
      }
    }
    scores[static_cast<std::size_t>(c)] = f;
  }
  return scores;
}

FittedReducer kbest_fit(const Eigen::MatrixXd& x, const std::vector<int>& labels, std::size_t k,
                        std::string fitted_on) {
  const auto D = static_cast<std::size_t>(x.cols());
  if (k < 1 || k > D)
    throw Error(ErrorCode::k_out_of_range,
                "k=" + std::to_string(k) + " outside [1, " + std::to_string(D) + "]");
  const auto scores = anova_f_scores(x, labels);
  std::vector<std::size_t> order(D);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());

  FittedReducer r;
  r.spec = ReductionSpec::kbest(k);
  r.input_dim = D;
  r.fitted_on = std::move(fitted_on);
  r.selected = std::move(order);
  return r;
}

FittedReducer pca_fit(const Eigen::MatrixXd& x, double variance_target, std::string fitted_on) {
  if (x.rows() < 2) throw Error(ErrorCode::degenerate_input, "PCA needs at least 2 rows");
  if (!(variance_target > 0.0) || variance_target > 1.0)
    throw Error(ErrorCode::config_error, "variance target must be in (0,1]");

  FittedReducer r;
  r.spec = ReductionSpec::pca(variance_target);
  r.input_dim = static_cast<std::size_t>(x.cols());
  r.fitted_on = std::move(fitted_on);
  r.column_means = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - r.column_means.transpose();

  // Right singular vectors of the centered data are the covariance
  // eigenvectors; squared singular values / (n-1) are its eigenvalues.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const Eigen::VectorXd variances = sv.array().square() / static_cast<double>(x.rows() - 1);
  const double total = variances.sum();
  const double scale = centered.cwiseAbs().maxCoeff();
  if (!(total > 0.0) || scale == 0.0 || sv(0) <= scale * 1e-12)
    throw Error(ErrorCode::degenerate_input, "all rows are identical");

  const Eigen::Index available = variances.size();
  Eigen::Index keep = 0;
  double cumulative = 0.0;
  while (keep < available) {
    const double ratio = variances(keep) / total;
    if (ratio <= 0.0) break;
    r.explained_variance_ratio.push_back(ratio);
    cumulative += ratio;
    ++keep;
    if (cumulative >= variance_target - 1e-12) break;
  }

  r.components = svd.matrixV().leftCols(keep);
  for (Eigen::Index c = 0; c < keep; ++c) {
    Eigen::Index arg = 0;
    r.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (r.components(arg, c) < 0.0) r.components.col(c) *= -1.0;
  }
  return r;
}

FittedReducer reducer_fit(const ReductionSpec& spec, const Eigen::MatrixXd& x,
                          const std::vector<int>& labels, std::string fitted_on) {
  switch (spec.kind) {
    case ReductionSpec::Kind::none: {
      FittedReducer r;
      r.spec = spec;
      r.input_dim = static_cast<std::size_t>(x.cols());
      r.fitted_on = std::move(fitted_on);
      return r;
    }
    case ReductionSpec::Kind::kbest: {
      auto r = kbest_fit(x, labels, std::min<std::size_t>(spec.k, static_cast<std::size_t>(x.cols())),
                         std::move(fitted_on));
      r.spec = spec;  // keep the requested k; selected.size() holds the clipped one
      return r;
    }
    case ReductionSpec::Kind::pca:
      return pca_fit(x, spec.variance_target, std::move(fitted_on));
  }
  throw Error(ErrorCode::internal, "unknown reduction kind");
}

nlohmann::json to_json(const FittedReducer& r) {
  nlohmann::json j;
  j["kind"] = r.spec.to_string();
  j["input_dim"] = r.input_dim;
  j["fitted_on"] = r.fitted_on;
  if (r.spec.kind == ReductionSpec::Kind::kbest) j["selected"] = r.selected;
  if (r.spec.kind == ReductionSpec::Kind::pca) {
    j["column_means"] = std::vector<double>(r.column_means.data(),
                                            r.column_means.data() + r.column_means.size());
    j["explained_variance_ratio"] = r.explained_variance_ratio;
    // Components stored row-major: one array per principal axis.
    nlohmann::json comps = nlohmann::json::array();
    for (Eigen::Index c = 0; c < r.components.cols(); ++c) {
      std::vector<double> axis(static_cast<std::size_t>(r.components.rows()));
      for (Eigen::Index i = 0; i < r.components.rows(); ++i) axis[static_cast<std::size_t>(i)] = r.components(i, c);
      comps.push_back(axis);
    }
    j["components"] = comps;
  }
  return j;
}

FittedReducer reducer_from_json(const nlohmann::json& j) {
  try {
    FittedReducer r;
    r.spec = ReductionSpec::parse(j.at("kind").get<std::string>());
    r.input_dim = j.at("input_dim").get<std::size_t>();
    r.fitted_on = j.at("fitted_on").get<std::string>();
    if (r.spec.kind == ReductionSpec::Kind::kbest) {
      r.selected = j.at("selected").get<std::vector<std::size_t>>();
      for (std::size_t i = 0; i < r.selected.size(); ++i)
        if (r.selected[i] >= r.input_dim || (i > 0 && r.selected[i] <= r.selected[i - 1]))
          throw Error(ErrorCode::config_error, "kbest indices must be increasing and in range");
    }
    if (r.spec.kind == ReductionSpec::Kind::pca) {
      const auto means = j.at("column_means").get<std::vector<double>>();
      if (means.size() != r.input_dim) throw Error(ErrorCode::config_error, "column_means length");
      r.column_means = Eigen::Map<const Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
      r.explained_variance_ratio = j.at("explained_variance_ratio").get<std::vector<double>>();
      const auto& comps = j.at("components");
      r.components.resize(static_cast<Eigen::Index>(r.input_dim), static_cast<Eigen::Index>(comps.size()));
      for (std::size_t c = 0; c < comps.size(); ++c) {
        const auto axis = comps[c].get<std::vector<double>>();
        if (axis.size() != r.input_dim) throw Error(ErrorCode::config_error, "component length");
        for (std::size_t i = 0; i < axis.size(); ++i)
          r.components(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = axis[i];
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("reducer artifact: ") + e.what());
  }
}

}  // namespace phonesense
