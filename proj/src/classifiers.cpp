#include "phonesense/classifiers.hpp"

#include <algorithm>
#include <charconv>

#include "phonesense/error.hpp"
#include "text_io.hpp"

namespace phonesense {

ModelSpec ModelSpec::random_forest(int n_trees, std::uint64_t seed) {
  ModelSpec s;
  s.kind = Kind::rf;
  s.n_trees = n_trees;
  s.seed = seed;
  return s;
}

ModelSpec ModelSpec::svm(SvmKernel kernel, double C) {
  ModelSpec s;
  s.kind = Kind::svm;
  s.kernel = kernel;
  s.C = C;
  return s;
}

ModelSpec ModelSpec::constant(double score) {
  ModelSpec s;
  s.kind = Kind::constant;
  s.constant_score = score;
  return s;
}

ModelSpec ModelSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  auto fail = [&](const char* why) {
    return Error(ErrorCode::config_error, "model '" + std::string(text) + "': " + why);
  };

  if (head == "rf") {
    ModelSpec s = random_forest();
    if (!arg.empty()) {
      int trees = 0;
      auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), trees);
      if (ec != std::errc{} || ptr != arg.data() + arg.size() || trees < 1)
        throw fail("tree count must be a positive integer");
      s.n_trees = trees;
    }
    return s;
  }
  if (head == "svm_linear" || head == "svm_rbf") {
    ModelSpec s = svm(head == "svm_rbf" ? SvmKernel::rbf : SvmKernel::linear);
    if (!arg.empty()) {
      const auto c = detail::parse_double(arg);
      if (!c || !(*c > 0.0)) throw fail("C must be positive");
      s.C = *c;
    }
    return s;
  }
  if (head == "constant") {
    const auto v = detail::parse_double(arg);
    if (!v || *v < 0.0 || *v > 1.0) throw fail("constant score must be in [0,1]");
    return constant(*v);
  }
  throw fail("unknown model kind");
}

std::string ModelSpec::to_string() const {
  switch (kind) {
    case Kind::rf: return n_trees == 250 ? "rf" : "rf:" + std::to_string(n_trees);
    case Kind::svm: {
      std::string s = kernel == SvmKernel::rbf ? "svm_rbf" : "svm_linear";
      if (C != 1.0) s += ":" + detail::format_double(C);
      return s;
    }
    case Kind::constant: return "constant:" + detail::format_double(constant_score);
  }
  return "unknown";
}

TrainedModel train_model(const ModelSpec& spec, const Eigen::MatrixXd& x,
                         const std::vector<int>& labels, std::string fitted_on, Execution exec) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw Error(ErrorCode::dimension_mismatch, "labels and rows differ");
  TrainedModel m;
  m.spec = spec;
  m.input_dim = static_cast<std::size_t>(x.cols());
  m.fitted_on = std::move(fitted_on);
  switch (spec.kind) {
    case ModelSpec::Kind::rf:
      m.model = rf_train(x, labels, spec.n_trees, spec.seed, exec);
      break;
    case ModelSpec::Kind::svm:
      m.model = svm_train(x, labels, spec.kernel, spec.C);
      break;
    case ModelSpec::Kind::constant:
      m.model = ConstantModel{spec.constant_score};
      break;
  }
  return m;
}

double predict_score(const TrainedModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (static_cast<std::size_t>(x.size()) != model.input_dim)
    throw Error(ErrorCode::dimension_mismatch, "model expects " + std::to_string(model.input_dim) +
                                                   " features, got " + std::to_string(x.size()));
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantModel>) {
          return m.score;
        } else {
          return m.score(x);
        }
      },
      model.model);
}

std::vector<double> predict_scores(const TrainedModel& model, const Eigen::MatrixXd& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::RowVectorXd row = x.row(r);
    out[static_cast<std::size_t>(r)] = predict_score(model, row);
  }
  return out;
}

namespace {

nlohmann::json spec_to_json(const ModelSpec& s) {
  nlohmann::json j;
  j["name"] = s.to_string();
  j["seed"] = s.seed;
  switch (s.kind) {
    case ModelSpec::Kind::rf:
      j["kind"] = "rf";
      j["n_trees"] = s.n_trees;
      break;
    case ModelSpec::Kind::svm:
      j["kind"] = "svm";
      j["kernel"] = s.kernel == SvmKernel::rbf ? "rbf" : "linear";
      j["C"] = s.C;
      break;
    case ModelSpec::Kind::constant:
      j["kind"] = "constant";
      j["score"] = s.constant_score;
      break;
  }
  return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s = ModelSpec::parse(j.at("name").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace

nlohmann::json to_json(const TrainedModel& model) {
  nlohmann::json j;
  j["format"] = "phonesense.model";
  j["version"] = kModelFormatVersion;
  j["spec"] = spec_to_json(model.spec);
  j["input_dim"] = model.input_dim;
  j["fitted_on"] = model.fitted_on;
  if (const auto* rf = std::get_if<RandomForest>(&model.model)) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : rf->trees) {
      std::vector<int> feature, left, right, c0, c1;
      std::vector<double> threshold;
      for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        c0.push_back(n.count0);
        c1.push_back(n.count1);
      }
      trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                       {"right", right}, {"count0", c0}, {"count1", c1}});
    }
    j["forest"] = {{"trees", trees}};
  } else if (const auto* svm = std::get_if<SvmModel>(&model.model)) {
    nlohmann::json sv = nlohmann::json::array();
    for (Eigen::Index r = 0; r < svm->support_vectors.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(svm->support_vectors.cols()));
      for (Eigen::Index c = 0; c < svm->support_vectors.cols(); ++c)
        row[static_cast<std::size_t>(c)] = svm->support_vectors(r, c);
      sv.push_back(row);
    }
    j["svm"] = {{"kernel", svm->kernel == SvmKernel::rbf ? "rbf" : "linear"},
                {"C", svm->C},
                {"gamma", svm->gamma},
                {"support_vectors", sv},
                {"coef", svm->coef},
                {"bias", svm->bias},
                {"platt", {{"a", svm->platt.a}, {"b", svm->platt.b}}},
                {"converged", svm->converged},
                {"iterations", svm->iterations}};
  } else {
    j["constant"] = {{"score", std::get<ConstantModel>(model.model).score}};
  }
  return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "phonesense.model")
      throw Error(ErrorCode::config_error, "not a model artifact");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw Error(ErrorCode::config_error, "unsupported model version");
    TrainedModel m;
    m.spec = spec_from_json(j.at("spec"));
    m.input_dim = j.at("input_dim").get<std::size_t>();
    m.fitted_on = j.at("fitted_on").get<std::string>();
    if (j.contains("forest")) {
      RandomForest rf;
      for (const auto& t : j.at("forest").at("trees")) {
        const auto feature = t.at("feature").get<std::vector<int>>();
        const auto threshold = t.at("threshold").get<std::vector<double>>();
        const auto left = t.at("left").get<std::vector<int>>();
        const auto right = t.at("right").get<std::vector<int>>();
        const auto c0 = t.at("count0").get<std::vector<int>>();
        const auto c1 = t.at("count1").get<std::vector<int>>();
        const std::size_t n = feature.size();
        if (threshold.size() != n || left.size() != n || right.size() != n || c0.size() != n || c1.size() != n || n == 0)
          throw Error(ErrorCode::config_error, "inconsistent tree arrays");
        DecisionTree tree;
        for (std::size_t i = 0; i < n; ++i) {
          if (feature[i] >= 0) {
            if (static_cast<std::size_t>(feature[i]) >= m.input_dim || left[i] <= static_cast<int>(i) ||
                right[i] <= static_cast<int>(i) || static_cast<std::size_t>(left[i]) >= n ||
                static_cast<std::size_t>(right[i]) >= n)
              throw Error(ErrorCode::config_error, "tree node out of range");
          }
          tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], c0[i], c1[i]});
        }
        rf.trees.push_back(std::move(tree));
      }
      m.model = std::move(rf);
    } else if (j.contains("svm")) {
      const auto& s = j.at("svm");
      SvmModel svm;
      svm.kernel = s.at("kernel").get<std::string>() == "rbf" ? SvmKernel::rbf : SvmKernel::linear;
      svm.C = s.at("C").get<double>();
      svm.gamma = s.at("gamma").get<double>();
      svm.coef = s.at("coef").get<std::vector<double>>();
      svm.bias = s.at("bias").get<double>();
      svm.platt = {s.at("platt").at("a").get<double>(), s.at("platt").at("b").get<double>()};
      svm.converged = s.at("converged").get<bool>();
      svm.iterations = s.at("iterations").get<std::size_t>();
      const auto& sv = s.at("support_vectors");
      if (sv.size() != svm.coef.size()) throw Error(ErrorCode::config_error, "coef/support vector count");
      svm.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), static_cast<Eigen::Index>(m.input_dim));
      for (std::size_t r = 0; r < sv.size(); ++r) {
        const auto row = sv[r].get<std::vector<double>>();
        if (row.size() != m.input_dim) throw Error(ErrorCode::config_error, "support vector length");
        for (std::size_t c = 0; c < row.size(); ++c)
          svm.support_vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
      }
      m.model = std::move(svm);
    } else {
      m.model = ConstantModel{j.at("constant").at("score").get<double>()};
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("model artifact: ") + e.what());
  }
}

}  // namespace phonesense
