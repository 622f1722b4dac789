#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "irp/dataset.hpp"

namespace irp {

using FeatureVector = Eigen::VectorXd;

inline constexpr int kFeatureScales = 3;
inline constexpr int kFeaturesPerScale = 12;
inline constexpr int kFeatureDim = kFeatureScales * kFeaturesPerScale;

/// Frozen handcrafted extractor. For each of the scales g, g/2 and g/4
/// (2x2 average pooling between scales) it emits
///   mean, std, min, max, the four quadrant means, the four quadrant stds
/// with quadrants ordered top-left, top-right, bottom-left, bottom-right.
/// Stds are population stds. Throws std::invalid_argument when the image side
/// is not a multiple of 4 or is smaller than 8.
FeatureVector extract(const RawImage& image);

/// Per-coordinate standardization fitted once and never updated.
class Normalizer {
 public:
  static constexpr double kStdFloor = 1e-6;

  Normalizer() = default;
  Normalizer(Eigen::VectorXd mean, Eigen::VectorXd std);

  /// Population mean/std over `features`; std floored at kStdFloor.
  /// Needs at least two vectors of equal dimension.
  static Normalizer fit(std::span<const FeatureVector> features);

  FeatureVector apply(const FeatureVector& f) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& std() const { return std_; }
  Eigen::Index dim() const { return mean_.size(); }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
};

inline Normalizer fit_normalizer(std::span<const FeatureVector> features) { return Normalizer::fit(features); }
inline FeatureVector apply(const Normalizer& n, const FeatureVector& f) { return n.apply(f); }

/// Normalized features for every sample under the first `views` dihedral
/// transforms, stored column-wise: sample i, view v lives in column i*views+v.
/// Features are frozen, so a bank is computed once per run and shared by
/// training and every scoring pass.
class FeatureBank {
 public:
  FeatureBank() = default;
  FeatureBank(Eigen::MatrixXd columns, int views);

  /// One view per vector, for training on plain feature lists.
  static FeatureBank from_vectors(std::span<const FeatureVector> features);

  /// Extracts and normalizes every sample of `d` (all splits, dataset order).
  static FeatureBank build(const Dataset& d, const Normalizer& n, int views);

  int views() const { return views_; }
  Eigen::Index dim() const { return columns_.rows(); }
  std::size_t samples() const { return views_ == 0 ? 0 : static_cast<std::size_t>(columns_.cols() / views_); }

  auto column(std::size_t sample, int view) const {
    return columns_.col(static_cast<Eigen::Index>(sample) * views_ + view);
  }
  const Eigen::MatrixXd& columns() const { return columns_; }

 private:
  Eigen::MatrixXd columns_;
  int views_ = 0;
};

/// Raw (unnormalized) features of the listed samples under the first `views`
/// transforms; the set a normalizer is fitted on.
std::vector<FeatureVector> raw_features(const Dataset& d, std::span<const std::size_t> indices, int views);

}  // namespace irp
