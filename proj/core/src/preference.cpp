#include "graspr/preference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <fmt/format.h>

#include "graspr/error.hpp"

namespace graspr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// log(1 + exp(t)) without overflow.
double Log1pExp(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

Eigen::MatrixXd WithOnes(const Eigen::MatrixXd& z, bool intercept) {
  if (!intercept) return z;
  Eigen::MatrixXd a(z.rows(), z.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(z.cols()) = z;
  return a;
}

Eigen::MatrixXd Rows(const Eigen::MatrixXd& m, std::span<const int> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Eigen::VectorXd Rows(const Eigen::VectorXd& v, std::span<const int> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

void CheckLabels(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("{} rows but {} labels", x.rows(), y.size()));
  }
  if (!x.allFinite()) throw Error(ErrorCode::kInvalidArgument, "design matrix has non-finite values");
  bool zero = false, one = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) zero = true;
    else if (y[i] == 1.0) one = true;
    else throw Error(ErrorCode::kInvalidArgument, fmt::format("label {} at row {} is not 0 or 1", y[i], i));
  }
  if (!zero || !one) throw Error(ErrorCode::kUndefinedStatistic, "labels contain a single class");
}

bool HasBothClasses(const Eigen::VectorXd& y) {
  return (y.array() == 0.0).any() && (y.array() == 1.0).any();
}

// Standard errors, z and p-values from a covariance with the intercept first.
void FillWald(std::vector<CoefficientReport>& coefs, const Eigen::MatrixXd& cov, int offset) {
  for (std::size_t j = 0; j < coefs.size(); ++j) {
    CoefficientReport& c = coefs[j];
    const Eigen::Index k = static_cast<Eigen::Index>(j) + offset;
    if (cov.rows() <= k || !(cov(k, k) > 0.0)) continue;
    c.std_error = std::sqrt(cov(k, k));
    c.z = c.beta / c.std_error;
    c.p_value = std::erfc(std::abs(c.z) / std::sqrt(2.0));
  }
}

LogisticSolution Solve(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const FitConfig& config) {
  return config.penalty == Penalty::kL2 ? SolveRidge(z, y, config.lambda, config.solver)
                                        : SolveLasso(z, y, config.lambda, config.solver);
}

Eigen::VectorXd Probabilities(const Eigen::MatrixXd& z, const LogisticSolution& s) {
  Eigen::VectorXd p(z.rows());
  const Eigen::VectorXd eta = (z * s.beta).array() + s.intercept;
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = Sigmoid(eta[i]);
  return p;
}

std::span<const double> Span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

std::string_view ToString(Penalty penalty) { return penalty == Penalty::kL2 ? "l2" : "l1"; }

Penalty PenaltyFromString(std::string_view name) {
  if (name == "l2") return Penalty::kL2;
  if (name == "l1") return Penalty::kL1;
  throw Error(ErrorCode::kSchema, fmt::format("unknown penalty '{}'", name));
}

double Sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Standardization Standardization::Fit(const Eigen::MatrixXd& x) {
  Standardization s;
  const double n = static_cast<double>(std::max<Eigen::Index>(x.rows(), 1));
  s.mean = x.colwise().mean().transpose();
  s.std.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    s.std[j] = std::sqrt((x.col(j).array() - s.mean[j]).square().sum() / n);
  }
  return s;
}

Eigen::MatrixXd Standardization::Apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{} columns, standardization has {}", x.cols(), mean.size()));
  }
  Eigen::MatrixXd z(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (std[j] > 0.0) z.col(j) = (x.col(j).array() - mean[j]) / std[j];
    else z.col(j).setZero();
  }
  return z;
}

Eigen::VectorXd Standardization::Apply(const Eigen::VectorXd& x) const {
  return Apply(Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

void LogisticModel::Validate() const {
  int last = -1;
  for (const std::string& f : features) {
    const int idx = FeatureIndexOf(f);
    if (idx < 0) throw Error(ErrorCode::kFeatureOrder, fmt::format("unknown feature '{}'", f));
    if (idx <= last) {
      throw Error(ErrorCode::kFeatureOrder, fmt::format("feature '{}' is out of the canonical order", f),
                  fmt::format("expected a subsequence of: {}", fmt::join(kFeatureNames, ", ")));
    }
    last = idx;
  }
  const auto p = static_cast<Eigen::Index>(features.size());
  if (beta.size() != p || standardization.mean.size() != p || standardization.std.size() != p) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{} features, {} coefficients, {} means, {} spreads", p, beta.size(),
                            standardization.mean.size(), standardization.std.size()));
  }
  if (!beta.allFinite() || !std::isfinite(intercept) || !standardization.mean.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "model parameters must be finite");
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(standardization.std[j] > 0.0) || !std::isfinite(standardization.std[j])) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("standardization spread of '{}' must be positive", features[j]));
    }
  }
}

std::vector<int> LogisticModel::FeatureIndices() const {
  std::vector<int> idx;
  for (const std::string& f : features) {
    const int i = FeatureIndexOf(f);
    if (i < 0) throw Error(ErrorCode::kFeatureOrder, fmt::format("unknown feature '{}'", f));
    idx.push_back(i);
  }
  return idx;
}

Eigen::VectorXd LogisticModel::Select(const FeatureVector& delta) const {
  const std::vector<int> idx = FeatureIndices();
  Eigen::VectorXd x(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) x[static_cast<Eigen::Index>(j)] = delta[idx[j]];
  return x;
}

double LogisticModel::Predict(const Eigen::VectorXd& x) const {
  if (x.size() != beta.size()) {
    throw Error(ErrorCode::kFeatureOrder,
                fmt::format("delta has {} values, model uses {} features", x.size(), beta.size()));
  }
  double eta = intercept;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    eta += beta[j] * (x[j] - standardization.mean[j]) / standardization.std[j];
  }
  return Sigmoid(eta);
}

double LogisticModel::PredictDelta(const FeatureVector& delta) const { return Predict(Select(delta)); }

Eigen::VectorXd LogisticModel::OddsRatios() const { return beta.array().exp(); }

LogisticModel PretrainedModel(const OddsRatioTable& table, const Standardization& reference) {
  if (table.features.size() != table.odds_ratios.size()) {
    throw Error(ErrorCode::kSchema, "odds ratio table has mismatched columns");
  }
  // Rows may come in any order; the model uses canonical order.
  std::vector<std::size_t> rows(table.features.size());
  std::iota(rows.begin(), rows.end(), 0);
  for (const std::string& f : table.features) {
    if (FeatureIndexOf(f) < 0) throw Error(ErrorCode::kFeatureOrder, fmt::format("unknown feature '{}'", f));
  }
  std::sort(rows.begin(), rows.end(), [&](std::size_t i, std::size_t j) {
    return FeatureIndexOf(table.features[i]) < FeatureIndexOf(table.features[j]);
  });
  LogisticModel m;
  m.beta.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t j = rows[k];
    const double orr = table.odds_ratios[j];
    if (!(orr > 0.0) || !std::isfinite(orr)) {
      throw Error(ErrorCode::kSchema, fmt::format("odds ratio of '{}' must be positive", table.features[j]));
    }
    m.features.push_back(table.features[j]);
    m.beta[static_cast<Eigen::Index>(k)] = std::log(orr);
  }
  m.intercept = 0.0;
  m.standardization = reference;
  m.penalty = Penalty::kL2;
  m.lambda = 1.0;
  m.provenance = "table1";
  m.Validate();
  return m;
}

Standardization SymmetricReference(const Eigen::MatrixXd& deltas) {
  if (deltas.rows() == 0) throw Error(ErrorCode::kUndefinedStatistic, "no deltas for reference statistics");
  Standardization s;
  s.mean = Eigen::VectorXd::Zero(deltas.cols());
  s.std = (deltas.array().square().colwise().sum() / static_cast<double>(deltas.rows())).sqrt().transpose();
  for (Eigen::Index j = 0; j < s.std.size(); ++j) {
    if (!(s.std[j] > 0.0)) {
      throw Error(ErrorCode::kUndefinedStatistic, fmt::format("reference column {} has zero spread", j));
    }
  }
  return s;
}

double RidgeObjective(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                      double lambda) {
  const Eigen::VectorXd eta = (z * theta.tail(z.cols())).array() + theta[0];
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - Log1pExp(eta[i]);
  return ll - 0.5 * lambda * theta.tail(z.cols()).squaredNorm();
}

Eigen::VectorXd RidgeGradient(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                              double lambda) {
  const Eigen::VectorXd eta = (z * theta.tail(z.cols())).array() + theta[0];
  Eigen::VectorXd r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r[i] = y[i] - Sigmoid(eta[i]);
  Eigen::VectorXd g(z.cols() + 1);
  g[0] = r.sum();
  g.tail(z.cols()) = z.transpose() * r - lambda * theta.tail(z.cols());
  return g;
}

LogisticSolution SolveRidge(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double lambda,
                            const SolverOptions& options) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be non-negative");
  const Eigen::Index p = z.cols();
  const int off = options.fit_intercept ? 1 : 0;
  const Eigen::MatrixXd a = WithOnes(z, options.fit_intercept);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + off);
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(p + off, lambda);
  if (off) pen[0] = 0.0;

  const auto objective = [&](const Eigen::VectorXd& t) {
    const Eigen::VectorXd eta = a * t;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - Log1pExp(eta[i]);
    return ll - 0.5 * (pen.array() * t.array().square()).sum();
  };

  LogisticSolution sol;
  Eigen::MatrixXd info;
  double f = objective(theta);
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd eta = a * theta;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu[i] = Sigmoid(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    const Eigen::VectorXd grad = a.transpose() * (y - mu) - pen.cwiseProduct(theta);
    info = a.transpose() * w.asDiagonal() * a;
    info.diagonal() += pen;
    sol.iterations = it;
    if (grad.cwiseAbs().maxCoeff() < options.gradient_tolerance) {
      sol.converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      step = info.completeOrthogonalDecomposition().solve(grad);
    }
    // Rounding slack for the ascent test.
    const double slack = 1e-13 * (1.0 + std::abs(f));
    double t = 1.0, next = objective(theta + step);
    while (next < f - slack && t > 1e-10) {
      t *= 0.5;
      next = objective(theta + t * step);
    }
    theta += t * step;
    f = next;
    sol.iterations = it + 1;
    if (step.cwiseAbs().maxCoeff() < options.step_tolerance) {
      sol.converged = true;
      break;
    }
  }
  // Information at the returned parameters.
  {
    const Eigen::VectorXd eta = a * theta;
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double m = Sigmoid(eta[i]);
      w[i] = m * (1.0 - m);
    }
    info = a.transpose() * w.asDiagonal() * a;
    info.diagonal() += pen;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  sol.covariance = lu.isInvertible() ? Eigen::MatrixXd(lu.inverse()) : Eigen::MatrixXd();
  if (sol.covariance.size() > 0 && !off) {
    // Keep the intercept-first layout with a zero intercept row.
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p + 1, p + 1);
    c.bottomRightCorner(p, p) = sol.covariance;
    sol.covariance = c;
  }
  sol.intercept = off ? theta[0] : 0.0;
  sol.beta = theta.tail(p);
  return sol;
}

LogisticSolution SolveLasso(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double lambda,
                            const SolverOptions& options) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be non-negative");
  const Eigen::Index n = z.rows(), p = z.cols();
  double b0 = 0.0;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);

  const auto objective = [&](double c0, const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = (z * b).array() + c0;
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) nll += Log1pExp(eta[i]) - y[i] * eta[i];
    return nll + lambda * b.cwiseAbs().sum();
  };

  LogisticSolution sol;
  double f = objective(b0, beta);
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd eta = (z * beta).array() + b0;
    Eigen::VectorXd w(n), r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = Sigmoid(eta[i]);
      w[i] = std::max(mu * (1.0 - mu), 1e-10);
      r[i] = eta[i] + (y[i] - mu) / w[i];
    }
    // Coordinate descent on the weighted least-squares model.
    double c0 = b0;
    Eigen::VectorXd b = beta;
    Eigen::VectorXd e = r - (z * b).array().matrix() - Eigen::VectorXd::Constant(n, c0);
    const double wsum = w.sum();
    const Eigen::VectorXd col_w = (z.array().square().colwise() * w.array()).colwise().sum().transpose();
    for (int sweep = 0; sweep < 10000; ++sweep) {
      double change = 0.0;
      if (options.fit_intercept) {
        const double d = w.dot(e) / wsum;
        c0 += d;
        e.array() -= d;
        change = std::abs(d);
      }
      for (Eigen::Index j = 0; j < p; ++j) {
        if (!(col_w[j] > 0.0)) continue;
        const double rho = (z.col(j).array() * w.array() * e.array()).sum() + col_w[j] * b[j];
        const double shrunk = std::copysign(std::max(std::abs(rho) - lambda, 0.0), rho) / col_w[j];
        const double d = shrunk - b[j];
        if (d != 0.0) {
          e -= d * z.col(j);
          b[j] = shrunk;
          change = std::max(change, std::abs(d));
        }
      }
      if (change < 1e-13) break;
    }
    // Damped step toward the coordinate-descent solution.
    const double d0 = c0 - b0;
    const Eigen::VectorXd db = b - beta;
    double t = 1.0, next = objective(b0 + d0, beta + db);
    while (next > f && t > 1e-10) {
      t *= 0.5;
      next = objective(b0 + t * d0, beta + t * db);
    }
    const double move = std::max(std::abs(t * d0), db.size() ? (t * db).cwiseAbs().maxCoeff() : 0.0);
    b0 += t * d0;
    beta += t * db;
    // Exact zeros survive damping only when both ends are zero; restore them.
    for (Eigen::Index j = 0; j < p; ++j)
      if (b[j] == 0.0 && std::abs(beta[j]) < 1e-300) beta[j] = 0.0;
    f = next;
    sol.iterations = it + 1;
    if (move < options.step_tolerance) {
      sol.converged = true;
      break;
    }
  }
  sol.intercept = b0;
  sol.beta = beta;
  return sol;
}

double RocAuc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::kShapeMismatch, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1.0) {
        pos_rank_sum += mid_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::kUndefinedStatistic, "AUC needs both classes");
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double Accuracy(std::span<const double> probabilities, std::span<const double> labels) {
  if (probabilities.size() != labels.size() || labels.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "accuracy needs equally sized, non-empty inputs");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += ((probabilities[i] > 0.5) == (labels[i] == 1.0));
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

EvaluationMetrics Evaluate(const LogisticModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  model.Validate();
  if (x.cols() != static_cast<Eigen::Index>(model.features.size())) {
    throw Error(ErrorCode::kFeatureOrder, "evaluation columns do not match the model features");
  }
  Eigen::VectorXd p(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) p[i] = model.Predict(x.row(i).transpose());
  EvaluationMetrics m;
  m.accuracy = Accuracy(Span(p), Span(y));
  m.auc = HasBothClasses(y) ? RocAuc(Span(p), Span(y)) : kNaN;
  return m;
}

std::vector<double> CrossValidate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const FitConfig& config) {
  CheckLabels(x, y);
  if (config.folds < 2) throw Error(ErrorCode::kInvalidArgument, "cross-validation needs at least 2 folds");
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<int> fold(static_cast<std::size_t>(x.rows()));
  for (double cls : {0.0, 1.0}) {
    std::vector<int> idx;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y[i] == cls) idx.push_back(static_cast<int>(i));
    if (static_cast<int>(idx.size()) < config.folds) {
      throw Error(ErrorCode::kUndefinedStatistic,
                  fmt::format("class {} has {} rows, fewer than {} folds", cls, idx.size(), config.folds));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = static_cast<int>(k % config.folds);
  }
  std::vector<double> acc;
  for (int f = 0; f < config.folds; ++f) {
    std::vector<int> tr, te;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(static_cast<int>(i));
    const Eigen::MatrixXd xtr = Rows(x, tr), xte = Rows(x, te);
    const Eigen::VectorXd ytr = Rows(y, tr), yte = Rows(y, te);
    const Standardization s = Standardization::Fit(xtr);
    const LogisticSolution sol = Solve(s.Apply(xtr), ytr, config);
    const Standardization st = config.independent_standardization && te.size() > 1 ? Standardization::Fit(xte) : s;
    const Eigen::VectorXd p = Probabilities(st.Apply(xte), sol);
    acc.push_back(Accuracy(Span(p), Span(yte)));
  }
  return acc;
}

FitResult Fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::string> names,
              const FitConfig& config) {
  CheckLabels(x, y);
  if (static_cast<Eigen::Index>(names.size()) != x.cols()) {
    throw Error(ErrorCode::kFeatureOrder, fmt::format("{} names for {} columns", names.size(), x.cols()));
  }
  if (!(config.test_fraction >= 0.0 && config.test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "test fraction must be in [0, 1)");
  }
  FitResult result;
  FitReport& report = result.report;

  std::vector<int> keep;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double lo = x.col(j).minCoeff(), hi = x.col(j).maxCoeff();
    if (hi - lo > 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)})) {
      keep.push_back(static_cast<int>(j));
    } else {
      report.dropped.push_back(names[j]);
      report.warnings.push_back(fmt::format("dropped zero-variance feature '{}'", names[j]));
    }
  }
  if (keep.empty()) throw Error(ErrorCode::kUndefinedStatistic, "every feature has zero variance");
  Eigen::MatrixXd xk(x.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) xk.col(static_cast<Eigen::Index>(j)) = x.col(keep[j]);

  const auto n = static_cast<int>(x.rows());
  std::mt19937_64 rng(config.seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int test_n = static_cast<int>(std::ceil(config.test_fraction * n));
  const std::vector<int> te(order.begin(), order.begin() + test_n);
  const std::vector<int> tr(order.begin() + test_n, order.end());
  const Eigen::MatrixXd xtr = Rows(xk, tr);
  const Eigen::VectorXd ytr = Rows(y, tr);
  if (!HasBothClasses(ytr)) throw Error(ErrorCode::kUndefinedStatistic, "training split contains a single class");

  const Standardization s = Standardization::Fit(xtr);
  const Eigen::MatrixXd ztr = s.Apply(xtr);
  const LogisticSolution sol = Solve(ztr, ytr, config);
  report.converged = sol.converged;
  report.iterations = sol.iterations;
  report.intercept = sol.intercept;
  report.train_size = tr.size();
  report.test_size = te.size();
  if (!sol.converged) report.warnings.push_back("solver did not converge");

  const Eigen::VectorXd eta = (ztr * sol.beta).array() + sol.intercept;
  report.separated = ((2.0 * ytr.array() - 1.0) * eta.array() > 0.0).all();
  if (report.separated) report.warnings.push_back("training data are perfectly separated; coefficients held finite by the penalty");

  for (std::size_t j = 0; j < keep.size(); ++j) {
    CoefficientReport c;
    c.feature = names[keep[j]];
    c.beta = sol.beta[static_cast<Eigen::Index>(j)];
    c.odds_ratio = std::exp(c.beta);
    report.coefficients.push_back(c);
  }
  if (config.penalty == Penalty::kL2) {
    if (sol.covariance.size() > 0) FillWald(report.coefficients, sol.covariance, 1);
  } else {
    // Wald on the active set from the unpenalized information.
    std::vector<int> active;
    for (std::size_t j = 0; j < keep.size(); ++j)
      if (sol.beta[static_cast<Eigen::Index>(j)] != 0.0) active.push_back(static_cast<int>(j));
    Eigen::MatrixXd a(ztr.rows(), static_cast<Eigen::Index>(active.size()) + 1);
    a.col(0).setOnes();
    for (std::size_t k = 0; k < active.size(); ++k) a.col(static_cast<Eigen::Index>(k) + 1) = ztr.col(active[k]);
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) w[i] = Sigmoid(eta[i]) * (1.0 - Sigmoid(eta[i]));
    const Eigen::MatrixXd info = a.transpose() * w.asDiagonal() * a;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
    if (lu.isInvertible()) {
      const Eigen::MatrixXd cov = lu.inverse();
      for (std::size_t k = 0; k < active.size(); ++k) {
        CoefficientReport& c = report.coefficients[active[k]];
        const double v = cov(static_cast<Eigen::Index>(k) + 1, static_cast<Eigen::Index>(k) + 1);
        if (v > 0.0) {
          c.std_error = std::sqrt(v);
          c.z = c.beta / c.std_error;
          c.p_value = std::erfc(std::abs(c.z) / std::sqrt(2.0));
        }
      }
    }
  }

  if (!te.empty()) {
    const Eigen::MatrixXd xte = Rows(xk, te);
    const Eigen::VectorXd yte = Rows(y, te);
    const Standardization st = config.independent_standardization && te.size() > 1 ? Standardization::Fit(xte) : s;
    const Eigen::VectorXd p = Probabilities(st.Apply(xte), sol);
    report.test_accuracy = Accuracy(Span(p), Span(yte));
    if (HasBothClasses(yte)) {
      report.auc = RocAuc(Span(p), Span(yte));
    } else {
      report.auc = kNaN;
      report.warnings.push_back("AUC undefined: the test split contains a single class");
    }
  } else {
    report.test_accuracy = kNaN;
    report.auc = kNaN;
  }

  if (config.folds >= 2) {
    report.fold_accuracies = CrossValidate(xk, y, config);
    report.cv_accuracy = std::accumulate(report.fold_accuracies.begin(), report.fold_accuracies.end(), 0.0) /
                         static_cast<double>(report.fold_accuracies.size());
  } else {
    report.cv_accuracy = kNaN;
  }

  LogisticModel& m = result.model;
  for (int j : keep) m.features.push_back(names[j]);
  m.beta = sol.beta;
  m.intercept = sol.intercept;
  m.standardization = s;
  m.penalty = config.penalty;
  m.lambda = config.lambda;
  m.provenance = "fitted";
  return result;
}

FitResult FitReduced(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::string> names,
                     const FitReport& full, const FitConfig& config, double alpha) {
  std::vector<int> cols;
  std::vector<std::string> kept;
  for (const CoefficientReport& c : full.coefficients) {
    if (!(c.p_value < alpha)) continue;
    const auto it = std::find(names.begin(), names.end(), c.feature);
    if (it == names.end()) throw Error(ErrorCode::kFeatureOrder, fmt::format("unknown feature '{}'", c.feature));
    cols.push_back(static_cast<int>(it - names.begin()));
    kept.push_back(c.feature);
  }
  if (cols.empty()) throw Error(ErrorCode::kUndefinedStatistic, fmt::format("no coefficient has p < {}", alpha));
  Eigen::MatrixXd xr(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) xr.col(static_cast<Eigen::Index>(j)) = x.col(cols[j]);
  return Fit(xr, y, kept, config);
}

double SyntheticChoices::bayes_accuracy() const {
  return p.size() == 0 ? kNaN : p.array().max(1.0 - p.array()).mean();
}

SyntheticChoices DrawSyntheticChoices(const Eigen::VectorXd& beta, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SyntheticChoices s;
  const auto rows = static_cast<Eigen::Index>(n);
  s.x.resize(rows, beta.size());
  s.y.resize(rows);
  s.p.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < beta.size(); ++j) s.x(i, j) = normal(rng);
    s.p[i] = Sigmoid(s.x.row(i).dot(beta));
    s.y[i] = unit(rng) < s.p[i] ? 1.0 : 0.0;
  }
  return s;
}

std::vector<double> PreferenceField(const LogisticModel& model, const FeatureVector& reference,
                                    std::span<const FeatureVector> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "no candidate targets");
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const FeatureVector& c : candidates) scores.push_back(model.PredictDelta(DeltaFeatures(c, reference)));
  return scores;
}

}  // namespace graspr
