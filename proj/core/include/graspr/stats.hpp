#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "graspr/sampler.hpp"

namespace graspr {

struct Correlation {
  double r = 0.0;
  double p = 1.0;  // two-sided, t-distribution with n - 2 degrees of freedom
};

/// Pearson correlation of a feature with 0/1 labels. Throws
/// kUndefinedStatistic for a constant feature or single-class labels.
Correlation PointBiserial(std::span<const double> feature, std::span<const double> labels);

/// Pearson correlation with its t-test p-value. Throws kUndefinedStatistic
/// when either input is constant.
Correlation Pearson(std::span<const double> x, std::span<const double> y);

/// 1-based ranks, ties receive the average rank.
std::vector<double> AverageRanks(std::span<const double> values);

struct SpearmanMatrix {
  Eigen::MatrixXd rho;  // NaN where a column is constant
  Eigen::MatrixXd p;
  std::vector<int> constant_columns;
};
SpearmanMatrix Spearman(const Eigen::MatrixXd& x);

struct VifResult {
  Eigen::VectorXd vif;  // +inf under exact collinearity
  std::vector<int> collinear;
};
/// VIF_j = 1 / (1 - R^2_j) from regressing column j on the others with an
/// intercept. Requires more rows than columns.
VifResult Vif(const Eigen::MatrixXd& x);

struct SelectionConfig {
  double alpha = 0.05;
  double spearman_threshold = 0.7;
  double vif_threshold = 5.0;
  double lasso_lambda = 1.0;
};

struct SelectionStep {
  std::string feature;
  std::string stage;  // point_biserial, spearman, vif, lasso
  std::string reason;
};

/// Screening trail: point-biserial filter, pairwise Spearman pruning, iterative
/// VIF pruning, then L1 logistic regression on the survivors.
struct SelectionReport {
  std::vector<std::string> features;
  std::vector<Correlation> point_biserial;
  SpearmanMatrix spearman;
  std::vector<std::string> vif_features;
  Eigen::VectorXd vif;  // of vif_features at the end of VIF pruning
  std::vector<std::string> lasso_features;
  Eigen::VectorXd lasso_beta;
  std::vector<std::string> kept;
  std::vector<SelectionStep> dropped;
};

SelectionReport SelectFeatures(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               std::span<const std::string> names, const SelectionConfig& config = {});

struct PreferenceCell {
  Finger finger = Finger::kIndex;
  Stratum stratum = Stratum::kOnObject;
  int wins = 0;
  int appearances = 0;
  /// wins / appearances; NaN when the cell never appeared.
  double ratio() const;
};

/// Cells in finger-major, stratum-minor order (20 cells).
struct PreferenceRatioReport {
  std::vector<PreferenceCell> cells;
  const PreferenceCell& at(Finger f, Stratum s) const;
};

/// Throws kDanglingReference when a choice names an unknown target.
PreferenceRatioReport PreferenceRatios(std::span<const ChoiceRecord> choices, std::span<const TargetPoint> targets);

}  // namespace graspr
