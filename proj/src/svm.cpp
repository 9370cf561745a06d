#include <algorithm>
#include <cmath>
#include <limits>

#include "phonesense/classifiers.hpp"
#include "phonesense/error.hpp"

namespace phonesense {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// libsvm-style C-SVC solver state over a precomputed Gram matrix.
class SmoSolver {
 public:
  SmoSolver(const Eigen::MatrixXd& k, const std::vector<int>& y, double c)
      : k_(k), y_(y), c_(c), n_(y.size()), alpha_(n_, 0.0), grad_(n_, -1.0) {}

  SmoSolution run(const SmoOptions& opt) {
    const std::size_t cap =
        opt.max_iterations > 0 ? opt.max_iterations : std::max<std::size_t>(10 * n_ * n_, 1000);
    SmoSolution sol;
    if (opt.on_checkpoint) opt.on_checkpoint(0, dual_objective());
    std::size_t iter = 0;
    bool converged = false;
    while (iter < cap) {
      std::size_t i = 0, j = 0;
      if (!select_working_set(opt.tolerance, i, j)) {
        converged = true;
        break;
      }
      update_pair(i, j);
      ++iter;
      if (opt.on_checkpoint && iter % std::max<std::size_t>(opt.checkpoint_every, 1) == 0)
        opt.on_checkpoint(iter, dual_objective());
    }
    if (!converged) {
      // The cap may coincide with convergence; check once more.
      std::size_t i = 0, j = 0;
      converged = !select_working_set(opt.tolerance, i, j);
    }
    sol.alpha = alpha_;
    sol.bias = -rho();
    sol.iterations = iter;
    sol.converged = converged;
    sol.dual_objective = dual_objective();
    return sol;
  }

 private:
  [[nodiscard]] double q(std::size_t i, std::size_t j) const {
    return static_cast<double>(y_[i] * y_[j]) * k_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  [[nodiscard]] double qd(std::size_t i) const {
    return k_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
  }
  [[nodiscard]] bool at_upper(std::size_t i) const { return alpha_[i] >= c_; }
  [[nodiscard]] bool at_lower(std::size_t i) const { return alpha_[i] <= 0.0; }

  // Maximal violating i, then j by second-order gain.
  bool select_working_set(double eps, std::size_t& out_i, std::size_t& out_j) const {
    double gmax = -kInf;
    std::ptrdiff_t gmax_idx = -1;
    for (std::size_t t = 0; t < n_; ++t) {
      if (y_[t] == 1) {
        if (!at_upper(t) && -grad_[t] >= gmax) {
          gmax = -grad_[t];
          gmax_idx = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!at_lower(t) && grad_[t] >= gmax) {
        gmax = grad_[t];
        gmax_idx = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (gmax_idx < 0) return false;
    const auto i = static_cast<std::size_t>(gmax_idx);

    double gmax2 = -kInf;
    std::ptrdiff_t gmin_idx = -1;
    double obj_diff_min = kInf;
    for (std::size_t t = 0; t < n_; ++t) {
      if (y_[t] == 1) {
        if (at_lower(t)) continue;
        const double grad_diff = gmax + grad_[t];
        gmax2 = std::max(gmax2, grad_[t]);
        if (grad_diff > 0.0) {
          double quad = qd(i) + qd(t) - 2.0 * y_[i] * q(i, t);
          if (quad <= 0.0) quad = kTau;
          const double obj_diff = -(grad_diff * grad_diff) / quad;
          if (obj_diff <= obj_diff_min) {
            gmin_idx = static_cast<std::ptrdiff_t>(t);
            obj_diff_min = obj_diff;
          }
        }
      } else {
        if (at_upper(t)) continue;
        const double grad_diff = gmax - grad_[t];
        gmax2 = std::max(gmax2, -grad_[t]);
        if (grad_diff > 0.0) {
          double quad = qd(i) + qd(t) + 2.0 * y_[i] * q(i, t);
          if (quad <= 0.0) quad = kTau;
          const double obj_diff = -(grad_diff * grad_diff) / quad;
          if (obj_diff <= obj_diff_min) {
            gmin_idx = static_cast<std::ptrdiff_t>(t);
            obj_diff_min = obj_diff;
          }
        }
      }
    }
    if (gmax + gmax2 < eps || gmin_idx < 0) return false;
    out_i = i;
    out_j = static_cast<std::size_t>(gmin_idx);
    return true;
  }

  void update_pair(std::size_t i, std::size_t j) {
    const double old_ai = alpha_[i];
    const double old_aj = alpha_[j];
    double ai = old_ai;
    double aj = old_aj;
    const double qij = q(i, j);

    if (y_[i] != y_[j]) {
      double quad = qd(i) + qd(j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) {
          aj = 0.0;
          ai = diff;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > c_) {
          ai = c_;
          aj = c_ - diff;
        }
      } else if (aj > c_) {
        aj = c_;
        ai = c_ + diff;
      }
    } else {
      double quad = qd(i) + qd(j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c_) {
        if (ai > c_) {
          ai = c_;
          aj = sum - c_;
        }
      } else if (aj < 0.0) {
        aj = 0.0;
        ai = sum;
      }
      if (sum > c_) {
        if (aj > c_) {
          aj = c_;
          ai = sum - c_;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = sum;
      }
    }

    alpha_[i] = ai;
    alpha_[j] = aj;
    const double dai = ai - old_ai;
    const double daj = aj - old_aj;
    for (std::size_t t = 0; t < n_; ++t) grad_[t] += q(i, t) * dai + q(j, t) * daj;
  }

  [[nodiscard]] double rho() const {
    double ub = kInf, lb = -kInf, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double yg = y_[i] * grad_[i];
      if (at_upper(i)) {
        if (y_[i] == -1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (at_lower(i)) {
        if (y_[i] == 1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    return n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  }

  // sum(alpha) - 1/2 alpha' Q alpha, written through the maintained gradient.
  [[nodiscard]] double dual_objective() const {
    double f = 0.0;
    for (std::size_t i = 0; i < n_; ++i) f += alpha_[i] * (grad_[i] - 1.0);
    return -0.5 * f;
  }

  const Eigen::MatrixXd& k_;
  const std::vector<int>& y_;
  double c_;
  std::size_t n_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
};

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, SvmKernel kernel, double gamma) {
  Eigen::MatrixXd k = x * x.transpose();
  if (kernel == SvmKernel::rbf) {
    const Eigen::VectorXd sq = x.rowwise().squaredNorm();
    for (Eigen::Index j = 0; j < k.cols(); ++j)
      for (Eigen::Index i = 0; i < k.rows(); ++i)
        k(i, j) = std::exp(-gamma * std::max(0.0, sq(i) + sq(j) - 2.0 * k(i, j)));
  }
  return k;
}

}  // namespace

SmoSolution smo_solve(const Eigen::MatrixXd& kernel, const std::vector<int>& y, double C,
                      const SmoOptions& options) {
  if (kernel.rows() != kernel.cols() || static_cast<std::size_t>(kernel.rows()) != y.size())
    throw Error(ErrorCode::dimension_mismatch, "Gram matrix and labels disagree");
  if (!(C > 0.0)) throw Error(ErrorCode::config_error, "C must be positive");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw Error(ErrorCode::config_error, "SMO labels must be -1 or +1");
  }
  if (!pos || !neg) throw Error(ErrorCode::single_class, "SVM needs both classes");
  SmoSolver solver(kernel, y, C);
  return solver.run(options);
}

double platt_probability(const PlattParams& p, double f) {
  const double z = p.a * f + p.b;
  return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

PlattParams platt_fit(const std::vector<double>& dec, const std::vector<int>& labels) {
  if (dec.size() != labels.size()) throw Error(ErrorCode::length_mismatch, "Platt inputs differ");
  double prior1 = 0, prior0 = 0;
  for (int l : labels) (l == 1 ? prior1 : prior0) += 1.0;
  if (prior1 == 0 || prior0 == 0) throw Error(ErrorCode::single_class, "Platt needs both classes");

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  const std::size_t n = dec.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] == 1 ? hi : lo;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * a + b;
      f += z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  PlattParams p{0.0, std::log((prior0 + 1.0) / (prior1 + 1.0))};
  double fval = objective(p.a, p.b);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * p.a + p.b;
      double prob, q;
      if (z >= 0.0) {
        prob = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        prob = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = prob * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - prob;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = p.a + step * da;
      const double nb = p.b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        p = {na, nb};
        fval = nf;
        break;
      }
      step *= 0.5;
    }
    if (step < kMinStep) break;
  }
  return p;
}

double rbf_scale_gamma(const Eigen::MatrixXd& x) {
  if (x.rows() == 0 || x.cols() == 0) return 1.0;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double total_var =
      (x.rowwise() - mean).array().square().sum() / static_cast<double>(x.rows());  // sum of column variances
  if (!(total_var > 0.0)) return 1.0;
  // D * (total_var / D) = total_var
  return 1.0 / total_var;
}

double SvmModel::decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (x.size() != support_vectors.cols())
    throw Error(ErrorCode::dimension_mismatch, "SVM expects " + std::to_string(support_vectors.cols()) +
                                                   " features, got " + std::to_string(x.size()));
  double f = bias;
  for (Eigen::Index s = 0; s < support_vectors.rows(); ++s) {
    double kv;
    if (kernel == SvmKernel::linear) {
      kv = support_vectors.row(s).dot(x);
    } else {
      kv = std::exp(-gamma * (support_vectors.row(s) - x).squaredNorm());
    }
    f += coef[static_cast<std::size_t>(s)] * kv;
  }
  return f;
}

SvmModel svm_train(const Eigen::MatrixXd& x, const std::vector<int>& labels, SvmKernel kernel,
                   double C, const SmoOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw Error(ErrorCode::dimension_mismatch, "labels and rows differ");
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == 1 ? 1 : -1;

  SvmModel model;
  model.kernel = kernel;
  model.C = C;
  model.gamma = kernel == SvmKernel::rbf ? rbf_scale_gamma(x) : 0.0;
  const Eigen::MatrixXd k = gram_matrix(x, kernel, model.gamma);
  const SmoSolution sol = smo_solve(k, y, C, options);
  model.bias = sol.bias;
  model.converged = sol.converged;
  model.iterations = sol.iterations;

  std::vector<Eigen::Index> sv;
  for (std::size_t i = 0; i < sol.alpha.size(); ++i)
    if (sol.alpha[i] > 0.0) sv.push_back(static_cast<Eigen::Index>(i));
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(sv[s]);
    model.coef.push_back(sol.alpha[static_cast<std::size_t>(sv[s])] * y[static_cast<std::size_t>(sv[s])]);
  }

  std::vector<double> train_dec(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double f = model.bias;
    for (std::size_t s = 0; s < sv.size(); ++s)
      f += model.coef[s] * k(static_cast<Eigen::Index>(i), sv[s]);
    train_dec[i] = f;
  }
  model.platt = platt_fit(train_dec, labels);
  return model;
}

}  // namespace phonesense
