#include "graspr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <Eigen/QR>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "graspr/error.hpp"
#include "graspr/preference.hpp"

namespace graspr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double TwoSidedP(double r, std::size_t n) {
  if (n < 3) throw Error(ErrorCode::kUndefinedStatistic, "a correlation test needs at least 3 observations");
  const double df = static_cast<double>(n - 2);
  const double denom = 1.0 - r * r;
  if (denom <= 0.0) return 0.0;
  const double t = std::abs(r) * std::sqrt(df / denom);
  const boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

bool IsConstant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

std::span<const double> Column(const Eigen::MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

}  // namespace

Correlation Pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kShapeMismatch, "correlation inputs differ in length");
  if (x.empty() || IsConstant(x) || IsConstant(y)) {
    throw Error(ErrorCode::kUndefinedStatistic, "correlation with a constant input is undefined");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  Correlation c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  c.p = TwoSidedP(c.r, x.size());
  return c;
}

Correlation PointBiserial(std::span<const double> feature, std::span<const double> labels) {
  for (double l : labels) {
    if (l != 0.0 && l != 1.0) throw Error(ErrorCode::kInvalidArgument, fmt::format("label {} is not 0 or 1", l));
  }
  return Pearson(feature, labels);
}

std::vector<double> AverageRanks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

SpearmanMatrix Spearman(const Eigen::MatrixXd& x) {
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd ranks(x.rows(), p);
  SpearmanMatrix out;
  for (Eigen::Index j = 0; j < p; ++j) {
    const std::vector<double> r = AverageRanks(Column(x, j));
    ranks.col(j) = Eigen::Map<const Eigen::VectorXd>(r.data(), x.rows());
    if (x.rows() == 0 || IsConstant(Column(x, j))) out.constant_columns.push_back(static_cast<int>(j));
  }
  out.rho = Eigen::MatrixXd::Constant(p, p, kNaN);
  out.p = Eigen::MatrixXd::Constant(p, p, kNaN);
  const auto constant = [&](Eigen::Index j) {
    return std::find(out.constant_columns.begin(), out.constant_columns.end(), j) != out.constant_columns.end();
  };
  for (Eigen::Index i = 0; i < p; ++i) {
    if (constant(i)) continue;
    out.rho(i, i) = 1.0;
    out.p(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < p; ++j) {
      if (constant(j)) continue;
      const Correlation c = Pearson(Column(ranks, i), Column(ranks, j));
      out.rho(i, j) = out.rho(j, i) = c.r;
      out.p(i, j) = out.p(j, i) = c.p;
    }
  }
  return out;
}

VifResult Vif(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n <= p) throw Error(ErrorCode::kInvalidArgument, fmt::format("VIF needs more rows ({}) than columns ({})", n, p));
  const Standardization s = Standardization::Fit(x);
  const Eigen::MatrixXd z = s.Apply(x);
  VifResult out;
  out.vif.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(s.std[j] > 0.0)) {
      out.vif[j] = std::numeric_limits<double>::infinity();
      out.collinear.push_back(static_cast<int>(j));
      continue;
    }
    Eigen::MatrixXd a(n, p);
    a.col(0).setOnes();
    for (Eigen::Index k = 0, c = 1; k < p; ++k)
      if (k != j) a.col(c++) = z.col(k);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::VectorXd fit = a * qr.solve(z.col(j));
    const double rss = (z.col(j) - fit).squaredNorm();
    const double tss = (z.col(j).array() - z.col(j).mean()).square().sum();
    const double r2 = 1.0 - rss / tss;
    if (1.0 - r2 <= 1e-12) {
      out.vif[j] = std::numeric_limits<double>::infinity();
      out.collinear.push_back(static_cast<int>(j));
    } else {
      out.vif[j] = 1.0 / (1.0 - r2);
    }
  }
  return out;
}

SelectionReport SelectFeatures(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               std::span<const std::string> names, const SelectionConfig& config) {
  if (static_cast<Eigen::Index>(names.size()) != x.cols() || x.rows() != y.size()) {
    throw Error(ErrorCode::kShapeMismatch, "selection inputs have inconsistent shapes");
  }
  SelectionReport rep;
  rep.features.assign(names.begin(), names.end());
  const std::span<const double> labels(y.data(), static_cast<std::size_t>(y.size()));

  std::vector<int> alive;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Correlation c{kNaN, kNaN};
    try {
      c = PointBiserial(Column(x, j), labels);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefinedStatistic) throw;
      rep.dropped.push_back({names[j], "point_biserial", "undefined correlation (constant feature)"});
      rep.point_biserial.push_back(c);
      continue;
    }
    rep.point_biserial.push_back(c);
    if (c.p < config.alpha) {
      alive.push_back(static_cast<int>(j));
    } else {
      rep.dropped.push_back({names[j], "point_biserial", fmt::format("p = {:.4g} >= {}", c.p, config.alpha)});
    }
  }

  rep.spearman = Spearman(x);
  struct Pair {
    int i, j;
    double rho;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < alive.size(); ++a)
    for (std::size_t b = a + 1; b < alive.size(); ++b) {
      const double r = rep.spearman.rho(alive[a], alive[b]);
      if (std::abs(r) > config.spearman_threshold) pairs.push_back({alive[a], alive[b], r});
    }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return std::abs(a.rho) > std::abs(b.rho); });
  for (const Pair& pr : pairs) {
    const auto has = [&](int k) { return std::find(alive.begin(), alive.end(), k) != alive.end(); };
    if (!has(pr.i) || !has(pr.j)) continue;
    // Keep the feature more strongly associated with the label.
    const int drop = rep.point_biserial[pr.i].p <= rep.point_biserial[pr.j].p ? pr.j : pr.i;
    const int keep = drop == pr.i ? pr.j : pr.i;
    alive.erase(std::find(alive.begin(), alive.end(), drop));
    rep.dropped.push_back(
        {names[drop], "spearman", fmt::format("|rho| = {:.3f} with {}", std::abs(pr.rho), names[keep])});
  }

  const auto sub = [&](const std::vector<int>& cols) {
    Eigen::MatrixXd m(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = x.col(cols[k]);
    return m;
  };
  while (alive.size() > 1 && x.rows() > static_cast<Eigen::Index>(alive.size())) {
    const VifResult v = Vif(sub(alive));
    Eigen::Index worst = 0;
    const double top = v.vif.maxCoeff(&worst);
    rep.vif = v.vif;
    if (!(top > config.vif_threshold)) break;
    rep.dropped.push_back({names[alive[worst]], "vif", fmt::format("VIF = {:.3g}", top)});
    alive.erase(alive.begin() + worst);
    rep.vif.resize(0);
  }
  if (rep.vif.size() != static_cast<Eigen::Index>(alive.size())) {
    rep.vif = alive.size() > 1 && x.rows() > static_cast<Eigen::Index>(alive.size())
                  ? Vif(sub(alive)).vif
                  : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(alive.size()));
  }
  for (int k : alive) rep.vif_features.push_back(names[k]);

  if (!alive.empty() && (y.array() == 0.0).any() && (y.array() == 1.0).any()) {
    const Eigen::MatrixXd xs = sub(alive);
    const LogisticSolution sol = SolveLasso(Standardization::Fit(xs).Apply(xs), y, config.lasso_lambda);
    rep.lasso_features = rep.vif_features;
    rep.lasso_beta = sol.beta;
    for (std::size_t k = 0; k < alive.size(); ++k) {
      if (sol.beta[static_cast<Eigen::Index>(k)] != 0.0) {
        rep.kept.push_back(names[alive[k]]);
      } else {
        rep.dropped.push_back({names[alive[k]], "lasso", fmt::format("zero coefficient at lambda {}", config.lasso_lambda)});
      }
    }
  }
  return rep;
}

double PreferenceCell::ratio() const {
  return appearances == 0 ? kNaN : static_cast<double>(wins) / static_cast<double>(appearances);
}

const PreferenceCell& PreferenceRatioReport::at(Finger f, Stratum s) const {
  return cells.at(static_cast<std::size_t>(static_cast<int>(f) * 4 + static_cast<int>(s)));
}

PreferenceRatioReport PreferenceRatios(std::span<const ChoiceRecord> choices, std::span<const TargetPoint> targets) {
  std::unordered_map<std::string, const TargetPoint*> by_id;
  for (const TargetPoint& t : targets) by_id[t.id] = &t;
  PreferenceRatioReport rep;
  for (Finger f : kAllFingers)
    for (Stratum s : kAllStrata) rep.cells.push_back({f, s, 0, 0});
  const auto cell = [&](const std::string& id) -> PreferenceCell& {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::kDanglingReference, fmt::format("unknown target '{}'", id));
    const TargetPoint& t = *it->second;
    return rep.cells[static_cast<std::size_t>(static_cast<int>(t.finger) * 4 + static_cast<int>(t.stratum))];
  };
  for (const ChoiceRecord& c : choices) {
    PreferenceCell& a = cell(c.target_a);
    PreferenceCell& b = cell(c.target_b);
    ++a.appearances;
    ++b.appearances;
    ++(c.chose_a ? a : b).wins;
  }
  return rep;
}

}  // namespace graspr
