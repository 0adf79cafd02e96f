#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace coftherm {

/// Sample Pearson correlation. Throws on zero variance or length < 2.
double pearson(std::span<const double> x, std::span<const double> y);

/// Coefficient of determination 1 - SS_res / SS_tot. Throws NumericalError
/// when SS_tot is zero (constant truth).
double r2_score(std::span<const double> truth, std::span<const double> pred);
double mean_absolute_error(std::span<const double> truth, std::span<const double> pred);

/// Per-structure descriptor rows plus the regression target.
class FeatureTable {
public:
  FeatureTable(std::vector<std::string> feature_names, std::string target_name);

  void add_row(std::string name, std::vector<double> features, double target);

  std::size_t rows() const noexcept { return target_.size(); }
  std::size_t cols() const noexcept { return feature_names_.size(); }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const std::string& target_name() const noexcept { return target_name_; }
  const std::vector<std::string>& row_names() const noexcept { return row_names_; }
  const std::vector<double>& target() const noexcept { return target_; }

  double at(std::size_t row, std::size_t col) const { return x_[row * cols() + col]; }
  std::span<const double> row(std::size_t r) const { return {x_.data() + r * cols(), cols()}; }
  std::vector<double> column(std::size_t c) const;
  std::size_t column_index(const std::string& name) const;

  FeatureTable subset(std::span<const std::size_t> rows) const;
  FeatureTable without(const std::string& feature) const;
  /// Columns reordered so that new column k is old column order[k].
  FeatureTable permuted(std::span<const std::size_t> order) const;

  /// Finite values everywhere; void_fraction and dmr columns in [0, 1].
  void validate() const;

private:
  std::vector<std::string> feature_names_;
  std::string target_name_;
  std::vector<std::string> row_names_;
  std::vector<double> x_;
  std::vector<double> target_;
};

/// CSV with a header. A `name` column is optional; `target` names the
/// response column; every other column is a numeric feature.
FeatureTable read_feature_table(const std::filesystem::path& path,
                                const std::string& target = "kappa");
std::string feature_table_to_csv(const FeatureTable& t);

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t mtry = 0;     ///< 0 means ceil(n_features / 3)
  std::size_t min_leaf = 1;
  std::size_t max_depth = 0; ///< 0 means unlimited
  std::uint64_t seed = 0;
  /// Feature priority used for candidate sampling and tie-breaks; empty
  /// means 0..p-1. Permuting table columns together with this order
  /// reproduces the same forest.
  std::vector<std::size_t> feature_order;
};

struct TreeNode {
  std::int32_t feature = -1; ///< -1 marks a leaf
  double threshold = 0.0;    ///< go left when x <= threshold
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;        ///< mean training target of the node
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  std::vector<double> impurity_decrease; ///< per feature, SSE reduction
  std::vector<std::uint32_t> in_bag;     ///< bootstrap multiplicity per row

  double predict(std::span<const double> x) const;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  std::vector<std::string> feature_names;
  ForestConfig config;
  std::vector<double> oob_prediction; ///< NaN where a row was never out of bag

  std::size_t n_features() const noexcept { return feature_names.size(); }
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const FeatureTable& t) const;
};

/// Bootstrap-aggregated variance-reduction CART trees, fitted in parallel.
/// Each tree draws from its own stream derived from (seed, tree index), so
/// the result does not depend on the thread count.
ForestModel fit_forest(const FeatureTable& t, const ForestConfig& cfg = {});

/// Grow one tree on the given bootstrap sample (row indices, repeats allowed).
RegressionTree grow_tree(const FeatureTable& t, std::span<const std::size_t> sample,
                         const ForestConfig& cfg, std::uint64_t stream_seed);

/// Normalized impurity decrease per feature (per-tree normalized, averaged).
std::vector<double> gini_importance(const ForestModel& m);

/// Mean drop of R^2 on `held_out` when one column is shuffled, per feature.
std::vector<double> permutation_importance(const ForestModel& m, const FeatureTable& held_out,
                                           std::size_t n_repeats, std::uint64_t seed);

/// Shuffled fold assignment: fold i holds n/k rows, plus one for i < n%k.
std::vector<std::vector<std::size_t>> kfold_assignment(std::size_t n, std::size_t k,
                                                       std::uint64_t seed);

struct CvResult {
  double mean_r2 = 0.0;
  double std_r2 = 0.0; ///< population standard deviation over folds
  double mae = 0.0;    ///< mean over folds
  std::vector<double> fold_r2;
  std::vector<double> fold_mae;
};

CvResult kfold_cv(const FeatureTable& t, std::size_t k, const ForestConfig& cfg = {});

/// Random train/test split (test_fraction of rows, at least one each side).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
train_test_split(std::size_t n, double test_fraction, std::uint64_t seed);

} // namespace coftherm
