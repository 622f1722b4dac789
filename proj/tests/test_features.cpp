#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "irp/dataset.hpp"
#include "irp/features.hpp"
#include "irp/rng.hpp"
#include "irp/transforms.hpp"

using namespace irp;

namespace {

RawImage noise_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  RawImage img(size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) img.at(r, c) = static_cast<float>(rng.uniform());
  return img;
}

// Offsets of one scale's block: 0 mean, 1 std, 2 min, 3 max, 4..7 quadrant
// means, 8..11 quadrant stds.
int at(int scale, int k) { return scale * kFeaturesPerScale + k; }

}  // namespace

TEST_CASE("features: constant image") {
  const FeatureVector f = extract(RawImage(16, 0.25F));
  REQUIRE(f.size() == kFeatureDim);
  for (int s = 0; s < kFeatureScales; ++s) {
    CHECK(f(at(s, 0)) == doctest::Approx(0.25));
    CHECK(f(at(s, 1)) == doctest::Approx(0.0));
    CHECK(f(at(s, 2)) == doctest::Approx(0.25));
    CHECK(f(at(s, 3)) == doctest::Approx(0.25));
    for (int q = 0; q < 4; ++q) {
      CHECK(f(at(s, 4 + q)) == doctest::Approx(0.25));
      CHECK(f(at(s, 8 + q)) == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("features: single bright pixel against direct computation") {
  RawImage img(8, 0.0F);
  img.at(0, 0) = 1.0F;
  const FeatureVector f = extract(img);
  // Scale 0: mean 1/64, population std sqrt(1/64 - 1/64^2).
  CHECK(f(at(0, 0)) == doctest::Approx(1.0 / 64));
  CHECK(f(at(0, 1)) == doctest::Approx(std::sqrt(1.0 / 64 - 1.0 / 4096)));
  CHECK(f(at(0, 3)) == doctest::Approx(1.0));
  CHECK(f(at(0, 4)) == doctest::Approx(1.0 / 16));  // top-left quadrant
  CHECK(f(at(0, 5)) == doctest::Approx(0.0));
  // Scale 1 (4x4 after pooling): the corner cell averages to 1/4.
  CHECK(f(at(1, 3)) == doctest::Approx(0.25));
  CHECK(f(at(1, 0)) == doctest::Approx(1.0 / 64));
}

TEST_CASE("features: 180 degree rotation keeps globals and swaps opposite quadrants") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RawImage img = noise_image(16, seed);
    const FeatureVector a = extract(img);
    const FeatureVector b = extract(apply(Dihedral::rot180, img));
    for (int s = 0; s < kFeatureScales; ++s) {
      for (int k = 0; k < 4; ++k) CHECK(b(at(s, k)) == doctest::Approx(a(at(s, k))));
      for (int base : {4, 8}) {
        CHECK(b(at(s, base + 0)) == doctest::Approx(a(at(s, base + 3))));
        CHECK(b(at(s, base + 3)) == doctest::Approx(a(at(s, base + 0))));
        CHECK(b(at(s, base + 1)) == doctest::Approx(a(at(s, base + 2))));
        CHECK(b(at(s, base + 2)) == doctest::Approx(a(at(s, base + 1))));
      }
    }
  }
}

TEST_CASE("features: defect changes the feature vector") {
  const DatasetConfig cfg;
  const FeatureVector clean = extract(synthesize_image(cfg, 4, false));
  const FeatureVector bad = extract(synthesize_image(cfg, 4, true));
  CHECK((bad - clean).norm() > 1e-3);
  CHECK(bad(at(0, 0)) > clean(at(0, 0)));
}

TEST_CASE("features: image size preconditions") {
  CHECK_THROWS_AS(extract(RawImage(4, 0.0F)), std::invalid_argument);
  CHECK_THROWS_AS(extract(RawImage(10, 0.0F)), std::invalid_argument);
  CHECK_NOTHROW(extract(RawImage(8, 0.0F)));
}

TEST_CASE("normalizer: fit and apply") {
  std::vector<FeatureVector> xs(2, FeatureVector(2));
  xs[0] << 1.0, 5.0;
  xs[1] << 3.0, 5.0;
  const Normalizer n = fit_normalizer(xs);
  CHECK(n.mean()(0) == doctest::Approx(2.0));
  CHECK(n.std()(0) == doctest::Approx(1.0));
  CHECK(n.std()(1) == Normalizer::kStdFloor);
  const FeatureVector y = apply(n, xs[0]);
  CHECK(y(0) == doctest::Approx(-1.0));
  CHECK(y(1) == doctest::Approx(0.0));

  CHECK_THROWS_AS(fit_normalizer(std::vector<FeatureVector>(1, FeatureVector::Zero(2))), std::invalid_argument);
  CHECK_THROWS_AS(n.apply(FeatureVector::Zero(3)), std::invalid_argument);
}

TEST_CASE("normalizer: fitted data has zero mean and unit std") {
  Rng rng(3);
  std::vector<FeatureVector> xs;
  for (int i = 0; i < 50; ++i) {
    FeatureVector v(3);
    v << rng.normal() * 4 + 1, rng.uniform(), rng.normal() - 7;
    xs.push_back(v);
  }
  const Normalizer n = fit_normalizer(xs);
  FeatureVector sum = FeatureVector::Zero(3);
  FeatureVector sq = FeatureVector::Zero(3);
  for (const auto& x : xs) {
    const FeatureVector y = n.apply(x);
    sum += y;
    sq += y.cwiseProduct(y);
  }
  for (int k = 0; k < 3; ++k) {
    CHECK(sum(k) / 50 == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(sq(k) / 50 == doctest::Approx(1.0));
  }
}

TEST_CASE("feature bank: column layout matches direct extraction") {
  DatasetConfig cfg;
  cfg.n_train = 10;
  cfg.n_test_normal = 2;
  cfg.n_test_anomalous = 2;
  const Dataset d = generate(cfg, 2);
  const auto idx = d.indices(Split::train);
  const Normalizer n = fit_normalizer(raw_features(d, idx, 4));
  const FeatureBank bank = FeatureBank::build(d, n, 3);
  CHECK(bank.views() == 3);
  CHECK(bank.samples() == d.samples.size());
  CHECK(bank.dim() == kFeatureDim);
  for (std::size_t i : {0UL, 5UL, 13UL}) {
    const auto views = apply_transforms(d.samples[i].image, 3);
    for (int v = 0; v < 3; ++v) {
      const FeatureVector expect = n.apply(extract(views[static_cast<std::size_t>(v)]));
      CHECK((FeatureVector(bank.column(i, v)) - expect).norm() == doctest::Approx(0.0));
    }
  }
}
