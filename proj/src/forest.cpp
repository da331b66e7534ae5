#include "ivdl/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "ivdl/parallel.hpp"
#include "ivdl/rng.hpp"

namespace ivdl::learn {

double RegressionTree::predict(const Vector& x) const {
  int k = 0;
  while (nodes_[static_cast<std::size_t>(k)].feature >= 0) {
    const Node& node = nodes_[static_cast<std::size_t>(k)];
    k = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes_[static_cast<std::size_t>(k)].value;
}

double RegressionTree::predict_row(const Matrix& inputs, Eigen::Index row) const {
  int k = 0;
  while (nodes_[static_cast<std::size_t>(k)].feature >= 0) {
    const Node& node = nodes_[static_cast<std::size_t>(k)];
    k = inputs(row, node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes_[static_cast<std::size_t>(k)].value;
}

std::size_t RegressionTree::leaf_count() const { return leaves().size(); }

std::vector<int> RegressionTree::leaves() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].feature < 0) {
      out.push_back(static_cast<int>(k));
    }
  }
  return out;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& inputs, const Vector& targets, const TreeParams& params, Rng& rng)
      : inputs_(inputs), targets_(targets), params_(params), rng_(rng) {}

  RegressionTree build(std::vector<Eigen::Index> sample) {
    RegressionTree tree;
    total_ = static_cast<double>(sample.size());
    const int p = static_cast<int>(inputs_.cols());
    mtry_ = params_.mtry <= 0 || params_.mtry > p ? p : params_.mtry;
    features_.resize(static_cast<std::size_t>(p));

    struct Pending {
      std::vector<Eigen::Index> rows;
      int node;
    };
    tree.nodes_.emplace_back();
    std::vector<Pending> stack;
    stack.push_back({std::move(sample), 0});
    while (!stack.empty()) {
      Pending job = std::move(stack.back());
      stack.pop_back();
      auto& node = tree.nodes_[static_cast<std::size_t>(job.node)];
      const auto m = static_cast<int>(job.rows.size());
      double sum = 0.0;
      for (auto r : job.rows) {
        sum += targets_[r];
      }
      node.value = sum / m;
      node.count = m;
      node.fraction = m / total_;
      const int depth = node.depth;

      Split split;
      if (m >= 2 * params_.min_leaf && (params_.max_depth <= 0 || depth < params_.max_depth) &&
          !constant(job.rows)) {
        split = best_split(job.rows, sum);
      }
      if (split.feature < 0) {
        continue;
      }
      std::vector<Eigen::Index> left;
      std::vector<Eigen::Index> right;
      for (auto r : job.rows) {
        (inputs_(r, split.feature) <= split.threshold ? left : right).push_back(r);
      }
      const int left_id = static_cast<int>(tree.nodes_.size());
      tree.nodes_.emplace_back();
      tree.nodes_.emplace_back();
      auto& parent = tree.nodes_[static_cast<std::size_t>(job.node)];
      parent.feature = split.feature;
      parent.threshold = split.threshold;
      parent.left = left_id;
      parent.right = left_id + 1;
      tree.nodes_[static_cast<std::size_t>(left_id)].depth = depth + 1;
      tree.nodes_[static_cast<std::size_t>(left_id + 1)].depth = depth + 1;
      // Right first so the left subtree is expanded first.
      stack.push_back({std::move(right), left_id + 1});
      stack.push_back({std::move(left), left_id});
    }
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  bool constant(const std::vector<Eigen::Index>& rows) const {
    const double first = targets_[rows.front()];
    return std::all_of(rows.begin(), rows.end(),
                       [&](Eigen::Index r) { return targets_[r] == first; });
  }

  Split best_split(const std::vector<Eigen::Index>& rows, double sum) {
    const int p = static_cast<int>(inputs_.cols());
    std::iota(features_.begin(), features_.end(), 0);
    if (mtry_ < p) {
      for (int k = 0; k < mtry_; ++k) {
        const auto pick = k + static_cast<int>(rng_.below(static_cast<std::uint64_t>(p - k)));
        std::swap(features_[static_cast<std::size_t>(k)], features_[static_cast<std::size_t>(pick)]);
      }
      std::sort(features_.begin(), features_.begin() + mtry_);
    }
    const auto m = static_cast<int>(rows.size());
    const double base = sum * sum / m;
    double total_ss = 0.0;
    for (auto r : rows) {
      total_ss += targets_[r] * targets_[r];
    }
    const double min_gain = 1e-12 * std::max(total_ss - base, 1e-300);

    Split best;
    best.gain = min_gain;
    pairs_.resize(static_cast<std::size_t>(m));
    for (int k = 0; k < mtry_; ++k) {
      const int f = features_[static_cast<std::size_t>(k)];
      for (int i = 0; i < m; ++i) {
        const auto r = rows[static_cast<std::size_t>(i)];
        pairs_[static_cast<std::size_t>(i)] = {inputs_(r, f), targets_[r]};
      }
      std::sort(pairs_.begin(), pairs_.end());
      double left_sum = 0.0;
      for (int i = 0; i + 1 < m; ++i) {
        left_sum += pairs_[static_cast<std::size_t>(i)].second;
        const int nl = i + 1;
        const int nr = m - nl;
        if (nl < params_.min_leaf) {
          continue;
        }
        if (nr < params_.min_leaf) {
          break;
        }
        const double lo = pairs_[static_cast<std::size_t>(i)].first;
        const double hi = pairs_[static_cast<std::size_t>(i + 1)].first;
        if (!(lo < hi)) {
          continue;
        }
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = f;
          best.threshold = 0.5 * (lo + hi);
          if (!(best.threshold < hi)) {
            best.threshold = lo;
          }
        }
      }
    }
    return best;
  }

  const Matrix& inputs_;
  const Vector& targets_;
  TreeParams params_;
  Rng& rng_;
  double total_ = 1.0;
  int mtry_ = 1;
  std::vector<int> features_;
  std::vector<std::pair<double, double>> pairs_;
};

namespace {

void check_inputs(const Matrix& inputs, const Vector& targets, int min_leaf) {
  if (inputs.rows() != targets.size()) {
    throw DimensionError("inputs and targets must share length n");
  }
  if (inputs.rows() < 1) {
    throw DomainError("tree learners need at least one row");
  }
  if (min_leaf < 1) {
    throw DomainError("min_leaf must be at least 1");
  }
  if (!targets.allFinite() || !inputs.allFinite()) {
    throw DomainError("tree learners need finite inputs and targets");
  }
}

}  // namespace

RegressionTree fit_tree(const Matrix& inputs, const Vector& targets, const TreeParams& params,
                        std::uint64_t seed) {
  check_inputs(inputs, targets, params.min_leaf);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(inputs.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  Rng rng(seed);
  TreeBuilder builder(inputs, targets, params, rng);
  return builder.build(std::move(rows));
}

double ForestFit::predict(const Vector& x) const {
  if (x.size() != training_inputs_.cols()) {
    throw DimensionError("expected " + std::to_string(training_inputs_.cols()) +
                         " covariates, got " + std::to_string(x.size()));
  }
  double total = 0.0;
  for (const auto& tree : trees_) {
    total += tree.predict(x);
  }
  return total / static_cast<double>(trees_.size());
}

Vector ForestFit::predict(const Matrix& inputs) const {
  if (inputs.cols() != training_inputs_.cols()) {
    throw DimensionError("expected " + std::to_string(training_inputs_.cols()) +
                         " covariates, got " + std::to_string(inputs.cols()));
  }
  Vector out = Vector::Zero(inputs.rows());
  for (const auto& tree : trees_) {
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
      out[i] += tree.predict_row(inputs, i);
    }
  }
  return out / static_cast<double>(trees_.size());
}

double ForestFit::predict_oob(Eigen::Index row) const {
  const auto c = static_cast<std::size_t>(canonical_of_[static_cast<std::size_t>(row)]);
  double total = 0.0;
  int used = 0;
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    if (!in_bag_[t][c]) {
      total += trees_[t].predict_row(training_inputs_, row);
      ++used;
    }
  }
  if (used == 0) {
    for (const auto& tree : trees_) {
      total += tree.predict_row(training_inputs_, row);
    }
    return total / static_cast<double>(trees_.size());
  }
  return total / used;
}

Vector ForestFit::predict_oob() const {
  Vector out(training_inputs_.rows());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] = predict_oob(i);
  }
  return out;
}

ForestFit fit_forest(const Matrix& inputs, const Vector& targets, const ForestParams& params) {
  check_inputs(inputs, targets, params.min_leaf);
  if (params.num_trees < 1) {
    throw DomainError("forest needs at least one tree");
  }
  const Eigen::Index n = inputs.rows();
  const Eigen::Index p = inputs.cols();

  // Canonical order: lexicographic on (x, target).
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (inputs(a, j) != inputs(b, j)) {
        return inputs(a, j) < inputs(b, j);
      }
    }
    return targets[a] < targets[b];
  });
  Matrix canon_x(n, p);
  Vector canon_y(n);
  ForestFit fit;
  fit.canonical_of_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    canon_x.row(k) = inputs.row(src);
    canon_y[k] = targets[src];
    fit.canonical_of_[static_cast<std::size_t>(src)] = k;
  }

  fit.params_ = params;
  fit.training_inputs_ = inputs;
  const auto trees = static_cast<std::size_t>(params.num_trees);
  fit.trees_.resize(trees);
  fit.in_bag_.assign(trees, std::vector<bool>(static_cast<std::size_t>(n), false));

  TreeParams tree_params;
  tree_params.min_leaf = params.min_leaf;
  tree_params.max_depth = params.max_depth;
  tree_params.mtry = params.mtry > 0 ? params.mtry
                                     : static_cast<int>((p + 2) / 3);  // ceil(p / 3)

  parallel_for(trees, params.workers, [&](std::size_t t) {
    Rng rng(derive_seed({params.seed, static_cast<std::uint64_t>(t)}));
    std::vector<Eigen::Index> sample(static_cast<std::size_t>(n));
    auto& bag = fit.in_bag_[t];
    if (params.bootstrap) {
      for (auto& s : sample) {
        s = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        bag[static_cast<std::size_t>(s)] = true;
      }
    } else {
      std::iota(sample.begin(), sample.end(), Eigen::Index{0});
      std::fill(bag.begin(), bag.end(), true);
    }
    TreeBuilder builder(canon_x, canon_y, tree_params, rng);
    fit.trees_[t] = builder.build(std::move(sample));
  });
  return fit;
}

}  // namespace ivdl::learn
