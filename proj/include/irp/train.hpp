#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "irp/features.hpp"
#include "irp/flow.hpp"

namespace irp {

struct TrainConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainLog {
  /// Mean of the minibatch NLLs seen during each epoch, weighted by batch size.
  std::vector<double> epoch_nll;
  std::uint64_t seed = 0;

  int epochs() const { return static_cast<int>(epoch_nll.size()); }
  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

struct OptimizerState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long long step = 0;
};

/// Maximum-likelihood trainer with Adam.
///
/// Every epoch draws its shuffle (and, for multi-view banks, its per-sample
/// transform choice) from a stream keyed on (seed, global epoch index), so a
/// training run split into several run_epochs calls is bitwise identical to
/// one uninterrupted call over the same samples.
class Trainer {
 public:
  Trainer(FlowModel model, TrainConfig config);

  /// Trains `epochs` epochs on the bank columns of the listed samples and
  /// appends one entry per epoch to `log`.
  void run_epochs(const FeatureBank& bank, std::span<const std::size_t> samples, int epochs, TrainLog& log);

  /// Replaces the parameters and clears the optimizer state; the epoch counter
  /// keeps running so shuffles stay distinct.
  void restart(FlowModel model);

  const FlowModel& model() const { return model_; }
  const OptimizerState& optimizer() const { return opt_; }
  int epochs_done() const { return epochs_done_; }

 private:
  void adam_step(const Eigen::VectorXd& grad);

  FlowModel model_;
  TrainConfig config_;
  OptimizerState opt_;
  GradientWorkspace workspace_;
  Eigen::VectorXd grad_;
  Eigen::MatrixXd batch_;
  int epochs_done_ = 0;
};

struct TrainResult {
  FlowModel model;
  TrainLog log;
};

/// Convenience wrapper: trains `epochs` epochs on a plain feature list.
TrainResult train(FlowModel model, std::span<const FeatureVector> features, const TrainConfig& config, int epochs);

}  // namespace irp
