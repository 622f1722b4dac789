#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irp/dataset.hpp"
#include "irp/refinement.hpp"

namespace irp {

struct ScoredLabel {
  double score = 0.0;
  bool anomalous = false;
};

/// Rank-based AUROC (Mann-Whitney U over midranks): the probability that a
/// random anomalous sample scores above a random normal one, ties counted
/// one half. O(n log n). Throws std::invalid_argument unless both classes
/// are present, or on NaN scores.
double auroc(std::span<const ScoredLabel> samples);

struct GoodBadCounts {
  std::size_t good_removed = 0;
  std::size_t bad_removed = 0;

  std::size_t total() const { return good_removed + bad_removed; }
  friend bool operator==(const GoodBadCounts&, const GoodBadCounts&) = default;
};

/// Splits the removals of `log` by ground truth. Throws on ids missing from `d`.
GoodBadCounts removal_accounting(const RefinementLog& log, const Dataset& d);

enum class Method { vanilla, osr, irp };
inline constexpr Method kMethodOrder[] = {Method::vanilla, Method::osr, Method::irp};

const char* to_string(Method m);
Method parse_method(std::string_view text);

struct ReportRow {
  double noise_percent = 0.0;
  Method method = Method::vanilla;
  std::uint64_t seed = 0;
  double auroc = 0.0;
  std::size_t good_removed = 0;
  std::size_t bad_removed = 0;
  int epochs = 0;
  /// Seconds; only recorded on request because it breaks byte-reproducibility.
  std::optional<double> wall_time;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

struct SweepConfig {
  DatasetConfig data;
  std::vector<double> levels_percent = {0, 10, 20, 30, 40, 50};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  RefinementConfig refinement;
  TrainParams train;
  int workers = 1;
  bool record_wall_time = false;

  void validate() const;
};

/// Result of one method on one (level, seed) cell, before flattening into rows.
struct CellResult {
  double auroc = 0.0;
  GoodBadCounts removed;
  int epochs = 0;
  double seconds = 0.0;
};

/// Runs one method on an already generated dataset and evaluates AUROC on its
/// test split with count_eval transforms.
CellResult run_method(Method method, const Dataset& d, const PreparedData& prepared, const SweepConfig& cfg);

/// Every (level, seed) cell runs all three methods with identical seeds and
/// budgets. Rows come out ordered by level, then method, then seed, whatever
/// the worker count. A failing cell aborts the sweep with a message naming it.
ExperimentReport noise_sweep(const SweepConfig& cfg);

struct SummaryRow {
  double noise_percent = 0.0;
  Method method = Method::vanilla;
  std::size_t runs = 0;
  double mean_auroc = 0.0;
  /// Population standard deviation across seeds.
  double std_auroc = 0.0;
  double mean_good_removed = 0.0;
  double mean_bad_removed = 0.0;
};

/// Per (level, method) aggregates in canonical order.
std::vector<SummaryRow> summarize(const ExperimentReport& r);

/// Header noise_level,method,seed,auroc,good_removed,bad_removed,epochs,wall_time.
std::string render_csv(const ExperimentReport& r);
ExperimentReport parse_report_csv(std::string_view text);
/// 800x500 line chart of mean AUROC against noise level, one polyline per
/// method with +-1 std whiskers. Byte-deterministic.
std::string render_svg(const ExperimentReport& r);

}  // namespace irp
