#include "irp/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "irp/transforms.hpp"

namespace irp {

namespace {

struct Stats {
  double mean;
  double std;
  double min;
  double max;
};

Stats block_stats(const Eigen::MatrixXd& img, Eigen::Index r0, Eigen::Index c0, Eigen::Index rows, Eigen::Index cols) {
  const auto block = img.block(r0, c0, rows, cols);
  const double mean = block.mean();
  const double var = (block.array() - mean).square().mean();
  return {mean, std::sqrt(var), block.minCoeff(), block.maxCoeff()};
}

void scale_features(const Eigen::MatrixXd& img, double* out) {
  const Eigen::Index n = img.rows();
  const Stats global = block_stats(img, 0, 0, n, n);
  out[0] = global.mean;
  out[1] = global.std;
  out[2] = global.min;
  out[3] = global.max;
  const Eigen::Index h = n / 2;
  const Eigen::Index r0[4] = {0, 0, h, h};
  const Eigen::Index c0[4] = {0, h, 0, h};
  for (int q = 0; q < 4; ++q) {
    const Eigen::Index rows = r0[q] == 0 ? h : n - h;
    const Eigen::Index cols = c0[q] == 0 ? h : n - h;
    const Stats s = block_stats(img, r0[q], c0[q], rows, cols);
    out[4 + q] = s.mean;
    out[8 + q] = s.std;
  }
}

Eigen::MatrixXd pool2(const Eigen::MatrixXd& img) {
  const Eigen::Index n = img.rows() / 2;
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      out(r, c) = 0.25 * (img(2 * r, 2 * c) + img(2 * r, 2 * c + 1) + img(2 * r + 1, 2 * c) + img(2 * r + 1, 2 * c + 1));
    }
  }
  return out;
}

}  // namespace

FeatureVector extract(const RawImage& image) {
  const int g = image.size();
  if (g < 8 || g % 4 != 0) throw std::invalid_argument("image size must be a multiple of 4 and at least 8");
  Eigen::MatrixXd img(g, g);
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) img(r, c) = image.at(r, c);
  }
  FeatureVector f(kFeatureDim);
  scale_features(img, f.data());
  img = pool2(img);
  scale_features(img, f.data() + kFeaturesPerScale);
  img = pool2(img);
  scale_features(img, f.data() + 2 * kFeaturesPerScale);
  return f;
}

Normalizer::Normalizer(Eigen::VectorXd mean, Eigen::VectorXd std) : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.size() != std_.size()) throw std::invalid_argument("normalizer mean/std size mismatch");
  if ((std_.array() < kStdFloor).any()) throw std::invalid_argument("normalizer std below floor");
}

Normalizer Normalizer::fit(std::span<const FeatureVector> features) {
  if (features.size() < 2) throw std::invalid_argument("normalizer needs at least two feature vectors");
  const Eigen::Index d = features.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) {
    if (f.size() != d) throw std::invalid_argument("feature dimension mismatch");
    mean += f;
  }
  mean /= static_cast<double>(features.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) var.array() += (f - mean).array().square();
  var /= static_cast<double>(features.size());
  Eigen::VectorXd std = var.array().sqrt().max(kStdFloor);
  return Normalizer(std::move(mean), std::move(std));
}

FeatureVector Normalizer::apply(const FeatureVector& f) const {
  if (f.size() != mean_.size()) throw std::invalid_argument("feature dimension does not match normalizer");
  return ((f - mean_).array() / std_.array()).matrix();
}

FeatureBank::FeatureBank(Eigen::MatrixXd columns, int views) : columns_(std::move(columns)), views_(views) {
  if (views < 1 || columns_.cols() % views != 0) throw std::invalid_argument("bank columns not a multiple of views");
}

FeatureBank FeatureBank::from_vectors(std::span<const FeatureVector> features) {
  if (features.empty()) return {};
  Eigen::MatrixXd cols(features.front().size(), static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != cols.rows()) throw std::invalid_argument("feature dimension mismatch");
    cols.col(static_cast<Eigen::Index>(i)) = features[i];
  }
  return FeatureBank(std::move(cols), 1);
}

FeatureBank FeatureBank::build(const Dataset& d, const Normalizer& n, int views) {
  Eigen::MatrixXd cols(n.dim(), static_cast<Eigen::Index>(d.samples.size()) * views);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto images = apply_transforms(d.samples[i].image, views);
    for (int v = 0; v < views; ++v) {
      cols.col(static_cast<Eigen::Index>(i) * views + v) = n.apply(extract(images[static_cast<std::size_t>(v)]));
    }
  }
  return FeatureBank(std::move(cols), views);
}

std::vector<FeatureVector> raw_features(const Dataset& d, std::span<const std::size_t> indices, int views) {
  std::vector<FeatureVector> out;
  out.reserve(indices.size() * static_cast<std::size_t>(views));
  for (std::size_t i : indices) {
    for (const RawImage& img : apply_transforms(d.samples.at(i).image, views)) out.push_back(extract(img));
  }
  return out;
}

}  // namespace irp
