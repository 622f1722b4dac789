#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "irp/dataset.hpp"
#include "irp/features.hpp"
#include "irp/flow.hpp"
#include "irp/transforms.hpp"

namespace irp {

/// prior_only scores -log p_Z(z) of the latent alone; full_likelihood scores
/// -log p(y) = -log p_Z(z) - log_det.
enum class ScoreMode { prior_only, full_likelihood };

const char* to_string(ScoreMode mode);
ScoreMode parse_score_mode(std::string_view text);

struct ScoreEntry {
  std::uint32_t id = 0;
  double score = 0.0;

  friend bool operator==(const ScoreEntry&, const ScoreEntry&) = default;
};

struct ScoreTable {
  std::vector<ScoreEntry> entries;
  int model_epoch = 0;
  int transform_count = 1;

  std::vector<double> scores() const;
  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

/// Anomaly score of one image: the mean over the first `transform_count`
/// dihedral transforms of the negative log-likelihood of the normalized
/// extracted features.
double score_sample(const FlowModel& m, const Normalizer& norm, const RawImage& image, int transform_count,
                    ScoreMode mode = ScoreMode::prior_only);

inline double score_sample(const FlowModel& m, const Normalizer& norm, const Sample& s, const TransformSpec& spec,
                           Phase phase, ScoreMode mode = ScoreMode::prior_only) {
  return score_sample(m, norm, s.image, spec.count(phase), mode);
}

/// Scores every sample of `split`, in dataset order.
ScoreTable score_dataset(const FlowModel& m, const Normalizer& norm, const Dataset& d, Split split, int transform_count,
                         ScoreMode mode = ScoreMode::prior_only, int model_epoch = 0);

/// Same scores from a precomputed bank: `samples` are dataset positions, `ids`
/// the matching sample ids. Uses the first `transform_count` bank views.
ScoreTable score_bank(const FlowModel& m, const FeatureBank& bank, std::span<const std::size_t> samples,
                      std::span<const std::uint32_t> ids, int transform_count, ScoreMode mode, int model_epoch = 0);

/// Header `id,score`, 9 significant digits.
void write_score_csv(std::ostream& out, const ScoreTable& table);

}  // namespace irp
