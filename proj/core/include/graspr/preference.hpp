#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "graspr/features.hpp"

namespace graspr {

enum class Penalty { kL2, kL1 };
std::string_view ToString(Penalty penalty);
Penalty PenaltyFromString(std::string_view name);

/// Per-column z-scoring. Columns with zero spread map to 0.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  /// Population standard deviation (divides by n).
  static Standardization Fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd Apply(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd Apply(const Eigen::VectorXd& x) const;
};

/// Logistic regression on delta features: p(A preferred) =
/// sigmoid(intercept + beta . z(delta)).
struct LogisticModel {
  /// Model features; a subsequence of kFeatureNames in canonical order.
  std::vector<std::string> features;
  Eigen::VectorXd beta;
  double intercept = 0.0;
  Standardization standardization;
  Penalty penalty = Penalty::kL2;
  double lambda = 1.0;
  std::string provenance = "fitted";  // "table1" or "fitted"

  /// Throws kFeatureOrder for unknown or out-of-order features and
  /// kShapeMismatch / kInvalidArgument for inconsistent parameters.
  void Validate() const;

  /// Model-order indices into FeatureVector.
  std::vector<int> FeatureIndices() const;
  Eigen::VectorXd Select(const FeatureVector& delta) const;

  /// `x` holds raw delta values in model order.
  double Predict(const Eigen::VectorXd& x) const;
  double PredictDelta(const FeatureVector& delta) const;
  Eigen::VectorXd OddsRatios() const;
};

double Sigmoid(double t);

/// Odds ratios with their reported p-values, by feature name.
struct OddsRatioTable {
  std::vector<std::string> features;
  std::vector<double> odds_ratios;
  std::vector<double> p_values;
};

/// beta = ln(odds ratio), intercept 0, L2 with lambda 1.
LogisticModel PretrainedModel(const OddsRatioTable& table, const Standardization& reference);

/// Reference standardization for delta features: zero mean (deltas are
/// antisymmetric) and the root mean square of the given deltas as spread.
Standardization SymmetricReference(const Eigen::MatrixXd& deltas);

struct SolverOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  bool fit_intercept = true;
};

struct LogisticSolution {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Inverse penalized information at the optimum, intercept first (L2 only).
  Eigen::MatrixXd covariance;
};

/// Maximizes sum log-likelihood - lambda/2 |beta|^2 by damped Newton steps.
/// The intercept is not penalized.
LogisticSolution SolveRidge(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double lambda,
                            const SolverOptions& options = {});
/// Maximizes sum log-likelihood - lambda |beta|_1 by proximal Newton with
/// coordinate descent on each quadratic model. Zeros are exact.
LogisticSolution SolveLasso(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double lambda,
                            const SolverOptions& options = {});

/// Objective and gradient used by SolveRidge, parameters intercept first.
double RidgeObjective(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                      double lambda);
Eigen::VectorXd RidgeGradient(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                              double lambda);

struct FitConfig {
  Penalty penalty = Penalty::kL2;
  double lambda = 1.0;
  double test_fraction = 0.3;
  int folds = 5;
  std::uint64_t seed = 0;
  /// Standardize the test part with its own statistics (as in the study);
  /// false uses the training statistics.
  bool independent_standardization = true;
  SolverOptions solver;
};

struct CoefficientReport {
  std::string feature;
  double beta = 0.0;
  double odds_ratio = 1.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

struct FitReport {
  double test_accuracy = 0.0;
  double cv_accuracy = 0.0;
  double auc = 0.0;
  std::vector<double> fold_accuracies;
  std::vector<CoefficientReport> coefficients;
  double intercept = 0.0;
  bool converged = false;
  int iterations = 0;
  bool separated = false;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<std::string> dropped;
  std::vector<std::string> warnings;
};

struct FitResult {
  LogisticModel model;
  FitReport report;
};

/// Rows of `x` are delta vectors (columns named by `names`), `y` is 1 when A
/// was chosen. Zero-variance columns are dropped with a warning.
FitResult Fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::string> names,
              const FitConfig& config = {});

/// Refit on the features whose Wald p-value in `full` is below `alpha`.
FitResult FitReduced(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::string> names,
                     const FitReport& full, const FitConfig& config = {}, double alpha = 0.05);

/// Stratified k-fold accuracy with standardization refit per fold.
std::vector<double> CrossValidate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const FitConfig& config);

/// Rank-statistic AUC with ties counted half. Throws kUndefinedStatistic
/// unless both classes are present.
double RocAuc(std::span<const double> scores, std::span<const double> labels);

/// Fraction of rows where (p > 0.5) matches the label.
double Accuracy(std::span<const double> probabilities, std::span<const double> labels);

struct EvaluationMetrics {
  double accuracy = 0.0;
  double auc = 0.0;
};
EvaluationMetrics Evaluate(const LogisticModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Standard normal deltas with labels drawn from Bernoulli(sigmoid(x . beta)).
struct SyntheticChoices {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd p;  // generating probabilities
  /// Expected accuracy of the generating model: mean of max(p, 1 - p).
  double bayes_accuracy() const;
};
SyntheticChoices DrawSyntheticChoices(const Eigen::VectorXd& beta, std::size_t n, std::uint64_t seed);

/// Scores of candidate feature vectors against a reference: predict(candidate - reference).
std::vector<double> PreferenceField(const LogisticModel& model, const FeatureVector& reference,
                                    std::span<const FeatureVector> candidates);

}  // namespace graspr
