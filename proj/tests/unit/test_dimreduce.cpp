#include <gtest/gtest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "phonesense/dimreduce.hpp"
#include "phonesense/error.hpp"

using namespace phonesense;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) x(r, c) = n(rng);
  return x;
}

std::vector<int> alternating(std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  return y;
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

std::vector<double> covariance_row_major(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  std::vector<double> out;
  for (Eigen::Index r = 0; r < cov.rows(); ++r)
    for (Eigen::Index k = 0; k < cov.cols(); ++k) out.push_back(cov(r, k));
  return out;
}

}  // namespace

TEST(Anova, HandCase) {
  Eigen::MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 5, 6;
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const auto f = anova_f_scores(x, y);
  EXPECT_NEAR(f[0], 13.5, 1e-12);
  EXPECT_NEAR(f[0], oracle::anova_f({1, 2, 3}, {4, 5, 6}), 1e-12);
}

TEST(Anova, MatchesOracleOnRandomColumns) {
  const auto x = gaussian(30, 8, 1);
  const auto y = alternating(30);
  const auto f = anova_f_scores(x, y);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    std::vector<double> g0, g1;
    for (Eigen::Index r = 0; r < x.rows(); ++r) (y[static_cast<std::size_t>(r)] ? g1 : g0).push_back(x(r, c));
    EXPECT_NEAR(f[static_cast<std::size_t>(c)], oracle::anova_f(g0, g1), 1e-9 * (1 + f[static_cast<std::size_t>(c)]));
  }
}

TEST(Anova, ZeroVarianceColumnScoresZero) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(6, 1, 3.0);
  EXPECT_EQ(anova_f_scores(x, {0, 0, 0, 1, 1, 1})[0], 0.0);
}

TEST(KBest, PicksLabelAlignedColumn) {
  const auto y = alternating(40);
  auto x = gaussian(40, 5, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> eps(-0.01, 0.01);
  for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, 3) = y[static_cast<std::size_t>(r)] + eps(rng);
  const auto r = kbest_fit(x, y, 1, "fold-a");
  EXPECT_EQ(r.selected, (std::vector<std::size_t>{3}));
  EXPECT_EQ(r.fitted_on, "fold-a");
  const Eigen::MatrixXd out = r.apply(x);
  EXPECT_TRUE(out.col(0) == x.col(3));
}

TEST(KBest, FullKIsIdentity) {
  const auto x = gaussian(20, 7, 4);
  const auto r = kbest_fit(x, alternating(20), 7);
  EXPECT_TRUE(r.apply(x) == x);
}

TEST(KBest, TiesPreferLowerIndex) {
  Eigen::MatrixXd x(4, 3);
  x << 0, 0, 0, 0, 1, 1, 1, 2, 1, 2, 2, 3;
  x.col(2) = x.col(1);
  // all three columns score F = 9
  const auto f = anova_f_scores(x, {0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(f[0], 9.0);
  EXPECT_DOUBLE_EQ(f[1], 9.0);
  EXPECT_EQ(kbest_fit(x, {0, 0, 1, 1}, 1).selected, (std::vector<std::size_t>{0}));
  EXPECT_EQ(kbest_fit(x, {0, 0, 1, 1}, 2).selected, (std::vector<std::size_t>{0, 1}));
}

TEST(KBest, AffineInvariantSelection) {
  const auto y = alternating(50);
  auto x = gaussian(50, 12, 5);
  for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, 2) += 0.8 * y[static_cast<std::size_t>(r)];
  Eigen::MatrixXd t = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c) t.col(c) = x.col(c).array() * (0.5 + c) + 10.0 * c;
  EXPECT_EQ(kbest_fit(x, y, 4).selected, kbest_fit(t, y, 4).selected);
}

TEST(KBest, Errors) {
  const auto x = gaussian(10, 4, 6);
  EXPECT_EQ(code_of([&] { kbest_fit(x, alternating(10), 0); }), ErrorCode::k_out_of_range);
  EXPECT_EQ(code_of([&] { kbest_fit(x, alternating(10), 5); }), ErrorCode::k_out_of_range);
  EXPECT_EQ(code_of([&] { kbest_fit(x, std::vector<int>(10, 1), 2); }), ErrorCode::single_class);
}

TEST(KBest, ReducerFitClipsK) {
  const auto x = gaussian(10, 4, 7);
  EXPECT_EQ(reducer_fit(ReductionSpec::kbest(250), x, alternating(10)).output_dim(), 4u);
}

TEST(Pca, LineKeepsOneComponent) {
  Eigen::MatrixXd x(5, 2);
  x << 0, 0, 1, 1, 2, 2, 3, 3, 4, 4;
  const auto r = pca_fit(x);
  ASSERT_EQ(r.output_dim(), 1u);
  EXPECT_NEAR(r.explained_variance_ratio[0], 1.0, 1e-12);
  EXPECT_NEAR(r.components(0, 0), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(r.components(1, 0), std::sqrt(0.5), 1e-12);
}

TEST(Pca, IsotropicKeepsTwo) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  const auto r = pca_fit(x, 0.95);
  ASSERT_EQ(r.output_dim(), 2u);
  EXPECT_NEAR(r.explained_variance_ratio[0], 0.5, 1e-12);
}

TEST(Pca, FullRankRoundTrip) {
  const auto x = gaussian(50, 10, 8);
  const auto r = pca_fit(x, 1.0);
  ASSERT_EQ(r.output_dim(), 10u);
  const Eigen::MatrixXd centered = x.rowwise() - r.column_means.transpose();
  const Eigen::MatrixXd back = r.apply(x) * r.components.transpose();
  EXPECT_LT((back - centered).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, ComponentsOrthonormalAndSignFixed) {
  const auto x = gaussian(40, 12, 9);
  const auto r = pca_fit(x, 0.95);
  const Eigen::MatrixXd gram = r.components.transpose() * r.components;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index c = 0; c < r.components.cols(); ++c) {
    Eigen::Index arg = 0;
    r.components.col(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(r.components(arg, c), 0.0);
  }
  double cum = 0;
  for (double v : r.explained_variance_ratio) cum += v;
  EXPECT_GE(cum, 0.95);
}

TEST(Pca, SmallestPrefixReachingTarget) {
  const auto x = gaussian(40, 12, 10);
  const auto r = pca_fit(x, 0.8);
  double cum = 0;
  for (std::size_t i = 0; i + 1 < r.explained_variance_ratio.size(); ++i) cum += r.explained_variance_ratio[i];
  EXPECT_LT(cum, 0.8);
  EXPECT_GE(cum + r.explained_variance_ratio.back(), 0.8);
}

TEST(Pca, ProjectionsUncorrelated) {
  auto x = gaussian(60, 6, 11);
  x.col(1) += 2 * x.col(0);
  const auto r = pca_fit(x, 1.0);
  const Eigen::MatrixXd p = r.apply(x);
  const Eigen::MatrixXd c = p.rowwise() - p.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(p.rows() - 1);
  const double scale = cov.diagonal().maxCoeff();
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    for (Eigen::Index k = 0; k < cov.cols(); ++k)
      if (i != k) EXPECT_LT(std::fabs(cov(i, k)), 1e-6 * scale);
}

TEST(Pca, RatiosMatchJacobiOracle) {
  auto x = gaussian(30, 8, 12);
  x.col(4) = 3 * x.col(2) - x.col(5);
  const auto r = pca_fit(x, 1.0);
  const auto ev = oracle::jacobi_eigenvalues(covariance_row_major(x), 8);
  double total = 0;
  for (double v : ev) total += v;
  for (std::size_t i = 0; i < r.explained_variance_ratio.size(); ++i)
    EXPECT_NEAR(r.explained_variance_ratio[i], ev[i] / total, 1e-10) << i;
}

TEST(Pca, DegenerateInput) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(5, 3, 2.0);
  EXPECT_EQ(code_of([&] { pca_fit(x); }), ErrorCode::degenerate_input);
}

TEST(Reducer, JsonRoundTrip) {
  const auto x = gaussian(30, 9, 13);
  const auto y = alternating(30);
  for (const auto& spec : {ReductionSpec::none(), ReductionSpec::kbest(3), ReductionSpec::pca(0.9)}) {
    const auto r = reducer_fit(spec, x, y, "fold-7");
    const auto back = reducer_from_json(to_json(r));
    EXPECT_EQ(back.spec, r.spec);
    EXPECT_EQ(back.fitted_on, "fold-7");
    EXPECT_TRUE(back.apply(x) == r.apply(x)) << spec.to_string();
  }
}

TEST(ReductionSpecParse, Forms) {
  EXPECT_EQ(ReductionSpec::parse("none"), ReductionSpec::none());
  EXPECT_EQ(ReductionSpec::parse("kbest:40"), ReductionSpec::kbest(40));
  EXPECT_EQ(ReductionSpec::parse("pca"), ReductionSpec::pca());
  EXPECT_EQ(ReductionSpec::parse("pca:0.9"), ReductionSpec::pca(0.9));
  EXPECT_EQ(ReductionSpec::parse(ReductionSpec::kbest(120).to_string()), ReductionSpec::kbest(120));
  EXPECT_THROW(ReductionSpec::parse("lda"), Error);
}
