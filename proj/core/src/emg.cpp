#include "graspr/emg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "graspr/error.hpp"

namespace graspr {

namespace {

Eigen::MatrixXd Relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

Eigen::MatrixXd GatherColumns(const Eigen::MatrixXd& m, std::span<const int> cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

void CheckRange(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n, const char* what) {
  if (lo.size() != n || hi.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("{} normalization has {} / {} entries, expected {}", what,
                                                       lo.size(), hi.size(), n));
  }
  if (!lo.allFinite() || !hi.allFinite()) throw Error(ErrorCode::kInvalidArgument, "non-finite normalization");
}

Eigen::MatrixXd Normalize(const Eigen::MatrixXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::MatrixXd out = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double span = hi[r] - lo[r];
    if (span > 0.0) {
      out.row(r) = (x.row(r).array() - lo[r]) / span;
    } else {
      out.row(r).setZero();
    }
  }
  return out;
}

Eigen::MatrixXd Denormalize(const Eigen::MatrixXd& y, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::MatrixXd out = y;
  for (Eigen::Index r = 0; r < y.rows(); ++r) out.row(r) = y.row(r).array() * (hi[r] - lo[r]) + lo[r];
  return out;
}

double Softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw Error(ErrorCode::kShapeMismatch, "an MLP needs at least two layer sizes");
  for (int s : sizes_) {
    if (s <= 0) throw Error(ErrorCode::kShapeMismatch, "layer sizes must be positive");
  }
  Eigen::Index total = 0;
  for (std::size_t l = 1; l < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l]) * (sizes_[l - 1] + 1);
  }
  params_ = Eigen::VectorXd::Zero(total);
}

Mlp Mlp::Random(std::vector<int> sizes, std::uint64_t seed) {
  Mlp net(std::move(sizes));
  std::mt19937_64 rng(seed);
  for (int l = 0; l < net.layer_count(); ++l) {
    auto w = net.weights(l);
    const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
  }
  return net;
}

Eigen::Map<Mlp::RowMatrix> Mlp::weights(int layer) {
  return {params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}
Eigen::Map<const Mlp::RowMatrix> Mlp::weights(int layer) const {
  return {params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}
Eigen::Map<Eigen::VectorXd> Mlp::biases(int layer) {
  return {params_.data() + offsets_[layer] + sizes_[layer + 1] * sizes_[layer], sizes_[layer + 1]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::biases(int layer) const {
  return {params_.data() + offsets_[layer] + sizes_[layer + 1] * sizes_[layer], sizes_[layer + 1]};
}

void Mlp::set_parameters(const Eigen::VectorXd& p) {
  if (p.size() != params_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("parameter vector has {} entries, network has {}", p.size(), params_.size()));
  }
  params_ = p;
}

Eigen::VectorXd Mlp::Forward(const Eigen::VectorXd& x) const {
  return Forward(Eigen::MatrixXd(x)).col(0);
}

Eigen::MatrixXd Mlp::Forward(const Eigen::MatrixXd& x) const {
  if (x.rows() != input_size()) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("input has {} rows, network expects {}", x.rows(), input_size()));
  }
  Eigen::MatrixXd a = x;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = weights(l) * a;
    z.colwise() += biases(l);
    a = l + 1 < layer_count() ? Relu(z) : z;
  }
  return a;
}

double Mlp::Loss(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& y,
                 Eigen::VectorXd* grad) const {
  if (x.rows() != input_size() || y.rows() != output_size() || x.cols() != y.cols() || x.cols() == 0) {
    throw Error(ErrorCode::kShapeMismatch, "batch shapes do not match the network");
  }
  const int depth = layer_count();
  std::vector<Eigen::MatrixXd> acts(depth + 1);
  acts[0] = x;
  for (int l = 0; l < depth; ++l) {
    acts[l + 1] = weights(l) * acts[l];
    acts[l + 1].colwise() += biases(l);
    if (l + 1 < depth) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }
  const Eigen::MatrixXd diff = acts[depth] - y;
  const double count = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / count;
  if (grad == nullptr) return loss;

  grad->resize(params_.size());
  Eigen::MatrixXd delta = 2.0 * diff / count;
  for (int l = depth; l-- > 0;) {
    Eigen::Map<RowMatrix>(grad->data() + offsets_[l], sizes_[l + 1], sizes_[l]).noalias() =
        delta * acts[l].transpose();
    Eigen::Map<Eigen::VectorXd>(grad->data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]) =
        delta.rowwise().sum();
    if (l > 0) {
      // ReLU derivative: active where the layer output is positive.
      delta = (weights(l).transpose() * delta).cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

EmgModel EmgModel::Wrap(Mlp net) {
  EmgModel m;
  m.input_min = Eigen::VectorXd::Zero(net.input_size());
  m.input_max = Eigen::VectorXd::Ones(net.input_size());
  m.output_min = Eigen::VectorXd::Zero(net.output_size());
  m.output_max = Eigen::VectorXd::Ones(net.output_size());
  m.net = std::move(net);
  return m;
}

void EmgModel::Validate() const {
  if (net.sizes().empty()) throw Error(ErrorCode::kShapeMismatch, "EMG model has no layers");
  CheckRange(input_min, input_max, net.input_size(), "input");
  CheckRange(output_min, output_max, net.output_size(), "output");
  if (!net.AllFinite()) throw Error(ErrorCode::kInvalidArgument, "EMG model has non-finite parameters");
}

Eigen::MatrixXd PredictEmg(const EmgModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != model.net.input_size() || model.input_min.size() != inputs.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("EMG input has {} rows, model expects {}", inputs.rows(), model.net.input_size()));
  }
  const Eigen::MatrixXd y = model.net.Forward(Normalize(inputs, model.input_min, model.input_max));
  return Denormalize(y, model.output_min, model.output_max);
}

Eigen::VectorXd PredictEmg(const EmgModel& model, const Eigen::VectorXd& inputs) {
  return PredictEmg(model, Eigen::MatrixXd(inputs)).col(0);
}

double EmgAbsSum(const EmgModel& model, const Eigen::VectorXd& inputs) {
  return PredictEmg(model, inputs).cwiseAbs().sum();
}

PoseAngleMapping PoseAngleMapping::Default(const HandSkeleton& skeleton) {
  PoseAngleMapping m;
  const int n = std::min(skeleton.dof_count(), kEmgInputs);
  for (int i = 0; i < n; ++i) {
    const auto [lo, hi] = skeleton.dof_limits(i);
    m.entries[i] = {i, lo, hi};
  }
  return m;
}

Eigen::VectorXd PoseAngleMapping::Map(const Eigen::VectorXd& angles) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(kEmgInputs);
  for (int i = 0; i < kEmgInputs; ++i) {
    const Entry& e = entries[i];
    if (e.dof < 0) continue;
    if (e.dof >= angles.size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  fmt::format("mapping input {} reads DOF {} but the pose has {}", i, e.dof, angles.size()));
    }
    const double span = e.hi - e.lo;
    out[i] = span > 0.0 ? (angles[e.dof] - e.lo) / span : 0.0;
  }
  return out;
}

EmgMetrics EvaluateEmg(const EmgModel& model, const EmgDataset& data) {
  if (data.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty EMG dataset");
  const Eigen::MatrixXd pred = PredictEmg(model, data.inputs);
  const Eigen::MatrixXd diff = pred - data.outputs;
  EmgMetrics m;
  m.mae = diff.cwiseAbs().mean();
  m.mse = diff.squaredNorm() / static_cast<double>(diff.size());
  double r2 = 0.0;
  for (Eigen::Index c = 0; c < data.outputs.rows(); ++c) {
    const Eigen::RowVectorXd row = data.outputs.row(c);
    const double mean = row.mean();
    const double ss_tot = (row.array() - mean).square().sum();
    const double ss_res = diff.row(c).squaredNorm();
    r2 += ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  }
  m.r2 = r2 / static_cast<double>(data.outputs.rows());
  return m;
}

EmgTrainResult TrainEmg(const EmgDataset& data, const EmgTrainConfig& config) {
  const auto n = static_cast<int>(data.size());
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "empty EMG dataset");
  if (data.inputs.rows() != kEmgInputs || data.outputs.rows() != kEmgOutputs || data.outputs.cols() != n) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("EMG dataset must be {} x n inputs and {} x n outputs",
                                                       kEmgInputs, kEmgOutputs));
  }
  if (!data.inputs.allFinite() || !data.outputs.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "EMG dataset contains non-finite values");
  }
  if (config.epochs < 0 || config.batch_size <= 0 || !(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid EMG training configuration");
  }

  std::mt19937_64 rng(config.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  int holdout = static_cast<int>(std::ceil(config.holdout_fraction * n));
  if (n > 1) holdout = std::clamp(holdout, 1, n - 1);
  else holdout = 0;
  std::vector<int> train(order.begin(), order.end() - holdout);
  const std::vector<int> test(order.end() - holdout, order.end());

  EmgTrainResult result;
  EmgModel& model = result.model;
  const Eigen::MatrixXd train_x = GatherColumns(data.inputs, train);
  const Eigen::MatrixXd train_y = GatherColumns(data.outputs, train);
  model.input_min = train_x.rowwise().minCoeff();
  model.input_max = train_x.rowwise().maxCoeff();
  model.output_min = train_y.rowwise().minCoeff();
  model.output_max = train_y.rowwise().maxCoeff();
  model.net = Mlp::Random(kEmgArchitecture, rng());

  const Eigen::MatrixXd xn = Normalize(train_x, model.input_min, model.input_max);
  const Eigen::MatrixXd yn = Normalize(train_y, model.output_min, model.output_max);
  EmgDataset holdout_set;
  if (!test.empty()) {
    holdout_set.inputs = GatherColumns(data.inputs, test);
    holdout_set.outputs = GatherColumns(data.outputs, test);
  }

  Eigen::VectorXd params = model.net.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;
  std::vector<int> local(train.size());
  std::iota(local.begin(), local.end(), 0);
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  double c1 = 1.0, c2 = 1.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(local.begin(), local.end(), rng);
    const Eigen::MatrixXd ex = GatherColumns(xn, local);
    const Eigen::MatrixXd ey = GatherColumns(yn, local);
    for (Eigen::Index start = 0; start < ex.cols(); start += batch) {
      const Eigen::Index len = std::min(batch, ex.cols() - start);
      model.net.Loss(ex.middleCols(start, len), ey.middleCols(start, len), &grad);
      c1 *= config.beta1;
      c2 *= config.beta2;
      m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad;
      m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad.cwiseProduct(grad);
      params.array() -=
          config.learning_rate * (m1.array() / (1.0 - c1)) / ((m2.array() / (1.0 - c2)).sqrt() + config.epsilon);
      model.net.set_parameters(params);
    }
    result.report.epoch_loss.push_back(model.net.Loss(xn, yn));
    ++result.report.epochs_run;
    if (!test.empty()) {
      const double r2 = EvaluateEmg(model, holdout_set).r2;
      result.report.epoch_r2.push_back(r2);
      if (r2 >= config.target_r2) break;
    }
  }
  if (!model.net.AllFinite()) throw Error(ErrorCode::kInvalidArgument, "EMG training diverged");
  result.report.train_size = train.size();
  result.report.holdout_size = test.size();
  if (!test.empty()) result.report.holdout = EvaluateEmg(model, holdout_set);
  return result;
}

EmgDataset TeacherDataset(const Mlp& teacher, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  EmgDataset d;
  d.inputs.resize(teacher.input_size(), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < d.inputs.cols(); ++c)
    for (Eigen::Index r = 0; r < d.inputs.rows(); ++r) d.inputs(r, c) = unit(rng);
  d.outputs = teacher.Forward(d.inputs);
  return d;
}

EmgDataset SyntheticForearmDataset(const HandSkeleton& skeleton, std::size_t n, std::uint64_t seed) {
  const PoseAngleMapping mapping = PoseAngleMapping::Default(skeleton);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  EmgDataset d;
  d.inputs.resize(kEmgInputs, static_cast<Eigen::Index>(n));
  d.outputs.resize(kEmgOutputs, static_cast<Eigen::Index>(n));
  Eigen::VectorXd angles(skeleton.dof_count());
  for (Eigen::Index c = 0; c < d.inputs.cols(); ++c) {
    for (int i = 0; i < skeleton.dof_count(); ++i) {
      const auto [lo, hi] = skeleton.dof_limits(i);
      angles[i] = lo + (hi - lo) * unit(rng);
    }
    const Eigen::VectorXd x = mapping.Map(angles);
    d.inputs.col(c) = x;
    // Per-finger flexion drive: mean of the finger's normalized flexion DOFs
    // (every DOF except the first abduction axis), with cross-talk into the
    // neighbors.
    std::array<double, 5> flex{};
    for (Finger f : kAllFingers) {
      const auto& dofs = skeleton.finger_dofs(f);
      double s = 0.0;
      for (std::size_t k = 1; k < dofs.size(); ++k) s += x[dofs[k]];
      flex[static_cast<int>(f)] = dofs.size() > 1 ? s / static_cast<double>(dofs.size() - 1) : 0.0;
    }
    for (int f = 0; f < 5; ++f) {
      double drive = flex[f];
      if (f > 0) drive += 0.25 * flex[f - 1];
      if (f < 4) drive += 0.25 * flex[f + 1];
      const double abd = x[skeleton.finger_dofs(static_cast<Finger>(f)).front()];
      d.outputs(f, c) = Softplus(6.0 * (drive - 0.55) + 0.8 * (abd - 0.5));
      d.outputs(5 + f, c) = Softplus(6.0 * (0.45 - drive) - 0.8 * (abd - 0.5));
    }
  }
  const Eigen::VectorXd lo = d.outputs.rowwise().minCoeff();
  const Eigen::VectorXd hi = d.outputs.rowwise().maxCoeff();
  d.outputs = Normalize(d.outputs, lo, hi);
  return d;
}

}  // namespace graspr
