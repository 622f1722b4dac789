#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "irp/dataset.hpp"
#include "irp/evaluation.hpp"
#include "irp/refinement.hpp"

namespace irp {

/// Invalid configuration: unknown or duplicate key, malformed value, or a
/// value that violates a module precondition.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat experiment configuration. Text form is one `section.key = value` per
/// line; `#` starts a comment. Lists are comma separated.
///
///   dataset.n_train, dataset.n_test_normal, dataset.n_test_anomalous,
///   dataset.image_size, dataset.contamination, dataset.defect_intensity,
///   dataset.pixel_noise, dataset.wave_amplitude,
///   flow.blocks, flow.hidden, flow.clamp,
///   train.lr, train.batch_size, train.budget,
///   irp.pretrain, irp.cycle_epochs, irp.threshold_multiplier, irp.warm_start,
///   irp.min_keep_fraction,
///   score.mode, score.count_train, score.count_eval,
///   sweep.levels, sweep.seeds, sweep.workers,
///   out.dir, seed
struct RunConfig {
  DatasetConfig dataset;
  TrainParams train;
  RefinementConfig irp;
  std::vector<double> levels_percent = {0, 10, 20, 30, 40, 50};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int workers = 1;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;

  void validate() const;
  SweepConfig sweep() const;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace irp
