#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "irp/dataset.hpp"
#include "irp/features.hpp"
#include "irp/flow.hpp"
#include "irp/scoring.hpp"
#include "irp/train.hpp"
#include "irp/transforms.hpp"

namespace irp {

struct RefinementConfig {
  int pretrain_epochs = 30;
  int epochs_per_cycle = 1;
  int total_epoch_budget = 200;
  double threshold_multiplier = 1.2;
  bool warm_start = true;
  /// Removals stop once another one would leave fewer than this fraction of
  /// the initial train split.
  double min_keep_fraction = 0.5;

  void validate() const;
  int cycles() const;
};

/// Everything needed to build and fit one flow on a dataset.
struct TrainParams {
  int blocks = 4;
  int hidden = 64;
  double clamp_alpha = 1.9;
  TrainConfig optimizer;
  TransformSpec transforms;
  ScoreMode score_mode = ScoreMode::prior_only;

  void validate() const;
};

/// Middle order statistic; mean of the two middle values for even sizes.
double median(std::span<const double> scores);

struct OutlierCandidate {
  std::uint32_t id = 0;
  double score = 0.0;
  double median = 0.0;
  double threshold = 0.0;
};

/// The single highest score if it is strictly above multiplier * median; ties
/// on the maximum go to the smallest id.
std::optional<OutlierCandidate> select_outlier(const ScoreTable& table, double multiplier);

/// Every entry strictly above multiplier * median, worst first (ties by id).
std::vector<OutlierCandidate> select_all_outliers(const ScoreTable& table, double multiplier);

struct RefinementEvent {
  int cycle = 0;
  std::optional<std::uint32_t> removed_id;
  /// NaN when nothing was removed.
  double removed_score = 0.0;
  double median = 0.0;
  double threshold = 0.0;
  std::size_t train_size_before = 0;
  std::size_t train_size_after = 0;

  friend bool operator==(const RefinementEvent& a, const RefinementEvent& b);
};

struct RefinementLog {
  std::vector<RefinementEvent> events;
  std::vector<std::uint32_t> final_train_ids;

  std::size_t removal_count() const;
  std::vector<std::uint32_t> removed_ids() const;
  friend bool operator==(const RefinementLog&, const RefinementLog&) = default;
};

/// CSV with header
/// cycle,removed_id,removed_score,median,threshold,train_size_before,train_size_after
/// removed fields are left empty for cycles without a removal.
void write_refinement_csv(std::ostream& out, const RefinementLog& log);

struct RunResult {
  FlowModel model;
  Normalizer normalizer;
  RefinementLog log;
  TrainLog train_log;
};

/// Normalizer and feature bank a run works from. The normalizer is fitted
/// once on the raw train features (count_train views per sample) and then
/// frozen; the bank holds max(count_train, count_eval) views of every sample.
struct PreparedData {
  Normalizer normalizer;
  FeatureBank bank;
  std::vector<std::size_t> train;
  std::vector<std::uint32_t> train_ids;
};

PreparedData prepare(const Dataset& d, const TransformSpec& transforms);

/// Iterative refinement: pretrain, then per cycle score the current train
/// split, drop at most the single worst sample above T * median, retrain for
/// epochs_per_cycle. Leftover epochs after the last full cycle are trained
/// without scoring so every method spends exactly the total budget.
RunResult run_irp(const Dataset& d, const RefinementConfig& rc, const TrainParams& tp);
RunResult run_irp(const Dataset& d, const PreparedData& prepared, const RefinementConfig& rc, const TrainParams& tp);

/// Plain training on the full train split for `epochs` epochs.
RunResult run_vanilla(const Dataset& d, int epochs, const TrainParams& tp);
RunResult run_vanilla(const Dataset& d, const PreparedData& prepared, int epochs, const TrainParams& tp);

/// One-shot removal: pretrain, score once, drop every sample above T * median
/// (worst first, subject to the keep floor), train for the rest of the budget.
/// All events are logged at cycle 1.
RunResult run_osr(const Dataset& d, const RefinementConfig& rc, const TrainParams& tp);
RunResult run_osr(const Dataset& d, const PreparedData& prepared, const RefinementConfig& rc, const TrainParams& tp);

}  // namespace irp
