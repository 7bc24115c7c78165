#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "graspr/kinematics.hpp"

namespace graspr {

inline constexpr int kEmgInputs = 22;
inline constexpr int kEmgOutputs = 10;
inline const std::vector<int> kEmgArchitecture = {kEmgInputs, 64, 64, 32, kEmgOutputs};

/// Fully connected network with ReLU hidden layers and a linear output layer.
/// Batches are stored column-wise: one sample per column. All parameters live
/// in one flat vector (per layer: row-major weights, then biases).
class Mlp {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Mlp() = default;
  /// Zero-initialized network with the given layer widths (at least two).
  explicit Mlp(std::vector<int> sizes);
  /// He-uniform weights, zero biases.
  static Mlp Random(std::vector<int> sizes, std::uint64_t seed);

  const std::vector<int>& sizes() const { return sizes_; }
  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int parameter_count() const { return static_cast<int>(params_.size()); }

  Eigen::Map<RowMatrix> weights(int layer);
  Eigen::Map<const RowMatrix> weights(int layer) const;
  Eigen::Map<Eigen::VectorXd> biases(int layer);
  Eigen::Map<const Eigen::VectorXd> biases(int layer) const;

  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& params);

  Eigen::VectorXd Forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd Forward(const Eigen::MatrixXd& x) const;

  /// Mean squared error over every output of the batch. When `grad` is given
  /// it receives the gradient in parameters() order.
  double Loss(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& y,
              Eigen::VectorXd* grad = nullptr) const;

  bool AllFinite() const { return params_.allFinite(); }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;  // start of each layer's weights
  Eigen::VectorXd params_;
};

/// Network plus the min-max statistics that map raw inputs and outputs to
/// the [0, 1] range the network works in.
struct EmgModel {
  Mlp net;
  Eigen::VectorXd input_min, input_max;
  Eigen::VectorXd output_min, output_max;

  /// Identity normalization (all ranges [0, 1]).
  static EmgModel Wrap(Mlp net);
  void Validate() const;
};

Eigen::VectorXd PredictEmg(const EmgModel& model, const Eigen::VectorXd& inputs);
Eigen::MatrixXd PredictEmg(const EmgModel& model, const Eigen::MatrixXd& inputs);

/// Sum of absolute predicted channel values.
double EmgAbsSum(const EmgModel& model, const Eigen::VectorXd& inputs);

/// Skeleton DOFs to the 22 glove-angle inputs. Each entry scales one DOF
/// by its ROM into [0, 1]; entries with dof -1 read as 0.
struct PoseAngleMapping {
  struct Entry {
    int dof = -1;
    double lo = 0.0;
    double hi = 1.0;
  };
  std::array<Entry, kEmgInputs> entries;

  /// DOF i drives input i for the first 20 inputs; the last two are 0.
  static PoseAngleMapping Default(const HandSkeleton& skeleton);
  Eigen::VectorXd Map(const Eigen::VectorXd& angles) const;
};

struct EmgDataset {
  Eigen::MatrixXd inputs;   // kEmgInputs x n
  Eigen::MatrixXd outputs;  // kEmgOutputs x n
  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

struct EmgTrainConfig {
  int epochs = 200;
  int batch_size = 256;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Stop once the holdout R^2 reaches this value (checked after each epoch).
  double target_r2 = 2.0;
};

struct EmgMetrics {
  double mae = 0.0;
  double mse = 0.0;
  double r2 = 0.0;  // uniform average of per-channel R^2
};

struct EmgTrainReport {
  EmgMetrics holdout;
  std::vector<double> epoch_loss;  // training MSE after each epoch
  std::vector<double> epoch_r2;    // holdout R^2 after each epoch
  int epochs_run = 0;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
};

struct EmgTrainResult {
  EmgModel model;
  EmgTrainReport report;
};

/// Adam on MSE in normalized space. The last ceil(holdout_fraction * n)
/// samples of a seeded shuffle are held out; normalization comes from the
/// training part.
EmgTrainResult TrainEmg(const EmgDataset& data, const EmgTrainConfig& config = {});

/// Metrics in raw output units. Channels with zero variance contribute R^2 0.
EmgMetrics EvaluateEmg(const EmgModel& model, const EmgDataset& data);

/// Inputs uniform in [0, 1], outputs from `teacher`.
EmgDataset TeacherDataset(const Mlp& teacher, std::size_t n, std::uint64_t seed);

/// Synthetic forearm activity for skeleton poses: each channel is a softplus
/// of a fixed flexor or extensor weighting of finger flexion. Inputs are the
/// mapped glove angles of uniformly drawn in-ROM poses; outputs are min-max
/// normalized over the set.
EmgDataset SyntheticForearmDataset(const HandSkeleton& skeleton, std::size_t n, std::uint64_t seed);

}  // namespace graspr
