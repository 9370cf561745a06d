#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "phonesense/classifiers.hpp"
#include "phonesense/error.hpp"
#include "phonesense/rng.hpp"

namespace phonesense {

namespace {

constexpr std::uint64_t kTreeStreamTag = 0x7265e5;

struct SplitCandidate {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  double purity = -1.0;  // (l0²+l1²)/nl + (r0²+r1²)/nr, larger is better
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const std::vector<int>& labels, Rng& rng)
      : x_(x), labels_(labels), rng_(rng), features_(static_cast<std::size_t>(x.cols())) {
    std::iota(features_.begin(), features_.end(), 0);
    mtry_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
    mtry_ = std::clamp<std::size_t>(mtry_, 1, features_.size());
  }

  DecisionTree build(std::vector<int> rows) {
    DecisionTree tree;
    struct Pending {
      int node;
      std::vector<int> rows;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack;
    stack.push_back({0, std::move(rows)});

    while (!stack.empty()) {
      Pending item = std::move(stack.back());
      stack.pop_back();
      auto& node = tree.nodes[static_cast<std::size_t>(item.node)];
      for (int r : item.rows) (labels_[static_cast<std::size_t>(r)] == 1 ? node.count1 : node.count0)++;
      if (node.count0 == 0 || node.count1 == 0 || item.rows.size() < 2) continue;

      const SplitCandidate split = find_split(item.rows, node.count0, node.count1);
      if (!split.valid) continue;

      std::vector<int> left, right;
      for (int r : item.rows)
        (x_(r, split.feature) <= split.threshold ? left : right).push_back(r);

      const int left_id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& parent = tree.nodes[static_cast<std::size_t>(item.node)];
      parent.feature = split.feature;
      parent.threshold = split.threshold;
      parent.left = left_id;
      parent.right = left_id + 1;
      stack.push_back({left_id + 1, std::move(right)});
      stack.push_back({left_id, std::move(left)});
    }
    return tree;
  }

 private:
  SplitCandidate find_split(const std::vector<int>& rows, int total0, int total1) {
    SplitCandidate best;
    const std::size_t D = features_.size();
    // Draw features without replacement; keep drawing past mtry only while no
    // candidate has produced a valid partition.
    for (std::size_t drawn = 0; drawn < D; ++drawn) {
      if (drawn >= mtry_ && best.valid) break;
      std::uniform_int_distribution<std::size_t> pick(drawn, D - 1);
      std::swap(features_[drawn], features_[pick(rng_)]);
      evaluate_feature(features_[drawn], rows, total0, total1, best);
    }
    return best;
  }

  void evaluate_feature(int f, const std::vector<int>& rows, int total0, int total1,
                        SplitCandidate& best) {
    pairs_.clear();
    for (int r : rows) pairs_.emplace_back(x_(r, f), labels_[static_cast<std::size_t>(r)]);
    std::sort(pairs_.begin(), pairs_.end());

    const auto n = static_cast<double>(pairs_.size());
    double l0 = 0, l1 = 0;
    for (std::size_t i = 0; i + 1 < pairs_.size(); ++i) {
      (pairs_[i].second == 1 ? l1 : l0) += 1.0;
      if (!(pairs_[i].first < pairs_[i + 1].first)) continue;
      const double nl = static_cast<double>(i + 1);
      const double nr = n - nl;
      const double r0 = total0 - l0;
      const double r1 = total1 - l1;
      const double purity = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr;
      if (!best.valid || purity > best.purity) {
        double threshold = 0.5 * (pairs_[i].first + pairs_[i + 1].first);
        if (!(threshold < pairs_[i + 1].first)) threshold = pairs_[i].first;
        best = {true, f, threshold, purity};
      }
    }
  }

  const Eigen::MatrixXd& x_;
  const std::vector<int>& labels_;
  Rng& rng_;
  std::vector<int> features_;
  std::size_t mtry_ = 1;
  std::vector<std::pair<double, int>> pairs_;
};

DecisionTree grow_tree(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                       std::uint64_t seed, std::size_t tree_index) {
  Rng rng(substream_seed(seed, tree_index, kTreeStreamTag));
  const auto n = static_cast<int>(x.rows());
  std::uniform_int_distribution<int> draw(0, n - 1);
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = draw(rng);
  TreeBuilder builder(x, labels, rng);
  return builder.build(std::move(rows));
}

}  // namespace

int DecisionTree::vote(const double* row, std::ptrdiff_t stride) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0)
    i = static_cast<std::size_t>(row[nodes[i].feature * stride] <= nodes[i].threshold ? nodes[i].left
                                                                                     : nodes[i].right);
  return nodes[i].count1 > nodes[i].count0 ? 1 : 0;
}

std::size_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

double RandomForest::score(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (trees.empty()) return 0.0;
  int votes = 0;
  for (const auto& t : trees) votes += t.vote(x.data(), x.innerStride());
  return static_cast<double>(votes) / static_cast<double>(trees.size());
}

RandomForest rf_train(const Eigen::MatrixXd& x, const std::vector<int>& labels, int n_trees,
                      std::uint64_t seed, Execution exec) {
  if (n_trees < 1) throw Error(ErrorCode::config_error, "n_trees must be >= 1");
  if (x.rows() < 2) throw Error(ErrorCode::single_class, "random forest needs at least 2 rows");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw Error(ErrorCode::dimension_mismatch, "labels and rows differ");
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  if (ones == 0 || ones == static_cast<long>(labels.size()))
    throw Error(ErrorCode::single_class, "random forest needs both classes");

  RandomForest forest;
  forest.trees.resize(static_cast<std::size_t>(n_trees));
  if (exec == Execution::serial) {
    for (int t = 0; t < n_trees; ++t)
      forest.trees[static_cast<std::size_t>(t)] = grow_tree(x, labels, seed, static_cast<std::size_t>(t));
  } else {
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < n_trees; ++t)
      forest.trees[static_cast<std::size_t>(t)] = grow_tree(x, labels, seed, static_cast<std::size_t>(t));
  }
  return forest;
}

}  // namespace phonesense
