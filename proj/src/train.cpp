#include "irp/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "irp/rng.hpp"

namespace irp {

namespace {
constexpr std::uint64_t kTagEpoch = 21;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("train.lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
}

Trainer::Trainer(FlowModel model, TrainConfig config) : model_(std::move(model)), config_(config) {
  config_.validate();
  opt_.first_moment = Eigen::VectorXd::Zero(model_.parameter_count());
  opt_.second_moment = Eigen::VectorXd::Zero(model_.parameter_count());
}

void Trainer::restart(FlowModel model) {
  model_ = std::move(model);
  opt_ = OptimizerState{Eigen::VectorXd::Zero(model_.parameter_count()), Eigen::VectorXd::Zero(model_.parameter_count()), 0};
}

void Trainer::adam_step(const Eigen::VectorXd& grad) {
  ++opt_.step;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  opt_.first_moment = b1 * opt_.first_moment + (1.0 - b1) * grad;
  opt_.second_moment = b2 * opt_.second_moment + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt_.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt_.step));
  model_.parameters().array() -= config_.learning_rate * (opt_.first_moment.array() / c1) /
                                 ((opt_.second_moment.array() / c2).sqrt() + config_.epsilon);
}

void Trainer::run_epochs(const FeatureBank& bank, std::span<const std::size_t> samples, int epochs, TrainLog& log) {
  if (epochs <= 0) return;
  if (samples.empty()) throw std::invalid_argument("no training samples");
  if (bank.dim() != model_.dim()) throw std::invalid_argument("feature dimension does not match flow dimension");
  log.seed = config_.seed;

  const std::size_t n = samples.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config_.batch_size), n);
  std::vector<std::size_t> order(n);
  for (int e = 0; e < epochs; ++e) {
    Rng rng(config_.seed, (kTagEpoch << 32) | static_cast<std::uint64_t>(epochs_done_));
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      batch_.resize(model_.dim(), static_cast<Eigen::Index>(len));
      for (std::size_t k = 0; k < len; ++k) {
        const int view = bank.views() > 1 ? static_cast<int>(rng.below(static_cast<std::size_t>(bank.views()))) : 0;
        batch_.col(static_cast<Eigen::Index>(k)) = bank.column(samples[order[start + k]], view);
      }
      const double loss = workspace_.evaluate(model_, batch_, grad_);
      total += loss * static_cast<double>(len);
      adam_step(grad_);
    }
    log.epoch_nll.push_back(total / static_cast<double>(n));
    ++epochs_done_;
  }
}

TrainResult train(FlowModel model, std::span<const FeatureVector> features, const TrainConfig& config, int epochs) {
  if (features.empty()) throw std::invalid_argument("no training features");
  const FeatureBank bank = FeatureBank::from_vectors(features);
  std::vector<std::size_t> all(features.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  Trainer trainer(std::move(model), config);
  TrainLog log;
  log.seed = config.seed;
  trainer.run_epochs(bank, all, epochs, log);
  return {trainer.model(), std::move(log)};
}

}  // namespace irp
