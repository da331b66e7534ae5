#pragma once

#include <cstdint>
#include <vector>

#include "ivdl/common.hpp"

namespace ivdl::learn {

struct TreeParams {
  int min_leaf = 5;
  int max_depth = 0;  // 0 = unlimited
  int mtry = 0;       // 0 = all features
};

struct ForestParams {
  int num_trees = 500;
  int mtry = 0;  // 0 = ceil(p / 3)
  int min_leaf = 5;
  int max_depth = 0;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  int workers = 1;
};

// Axis-aligned CART regression tree. Internal nodes send x[feature] <=
// threshold to the left child; leaves predict the mean of their responses.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;     // mean response in the node
    double fraction = 0.0;  // share of the training sample reaching the node
    int count = 0;
    int depth = 0;
  };

  double predict(const Vector& x) const;
  double predict_row(const Matrix& inputs, Eigen::Index row) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;
  std::vector<int> leaves() const;

 private:
  friend class TreeBuilder;
  std::vector<Node> nodes_;
};

// Single tree over the full sample (sample indices may repeat). Ties between
// candidate splits go to the lowest feature index, then the lowest threshold.
RegressionTree fit_tree(const Matrix& inputs, const Vector& targets, const TreeParams& params,
                        std::uint64_t seed = 0);

class ForestFit {
 public:
  double predict(const Vector& x) const;
  Vector predict(const Matrix& inputs) const;

  // Out-of-bag prediction for training row `row` in the order rows were
  // passed to fit_forest. Falls back to the full forest when every tree saw
  // the row.
  double predict_oob(Eigen::Index row) const;
  Vector predict_oob() const;

  const std::vector<RegressionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }

 private:
  friend ForestFit fit_forest(const Matrix&, const Vector&, const ForestParams&);
  std::vector<RegressionTree> trees_;
  ForestParams params_;
  Matrix training_inputs_;
  // in_bag_[t][canonical_row] = true when tree t drew the row.
  std::vector<std::vector<bool>> in_bag_;
  // canonical position of each caller row
  std::vector<Eigen::Index> canonical_of_;
};

// Bagged CART. Rows are put into a canonical (content-sorted) order before
// bootstrapping, and each tree draws from its own seed-derived stream, so
// the fit depends neither on the caller's row order nor on `workers`.
ForestFit fit_forest(const Matrix& inputs, const Vector& targets, const ForestParams& params);

}  // namespace ivdl::learn
