#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "irp/dataset.hpp"
#include "irp/transforms.hpp"

using namespace irp;

namespace {

DatasetConfig small_config(double p) {
  DatasetConfig c;
  c.n_train = 40;
  c.n_test_normal = 10;
  c.n_test_anomalous = 10;
  c.contamination = p;
  return c;
}

RawImage ramp(int size) {
  RawImage img(size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) img.at(r, c) = static_cast<float>(r * size + c) / static_cast<float>(size * size);
  return img;
}

std::string bytes(const Dataset& d) {
  std::ostringstream s;
  write_dataset(s, d);
  return s.str();
}

}  // namespace

TEST_CASE("dataset: split sizes and exact contamination count") {
  for (double p : {0.0, 0.1, 0.25, 0.5}) {
    const Dataset d = generate(small_config(p), 7);
    CHECK(d.count(Split::train) == 40);
    CHECK(d.count(Split::test, Label::normal) == 10);
    CHECK(d.count(Split::test, Label::anomalous) == 10);
    CHECK(d.count(Split::train, Label::anomalous) == static_cast<std::size_t>(std::lround(p * 40)));
    CHECK(d.contamination_rate == p);
  }
}

TEST_CASE("dataset: ids are dense and train comes first") {
  const Dataset d = generate(small_config(0.2), 3);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    CHECK(d.samples[i].id == i);
    CHECK(d.samples[i].split == (i < 40 ? Split::train : Split::test));
    d.samples[i].image.validate();
  }
}

TEST_CASE("dataset: generation is deterministic per seed") {
  const auto cfg = small_config(0.3);
  CHECK(bytes(generate(cfg, 11)) == bytes(generate(cfg, 11)));
  CHECK(bytes(generate(cfg, 11)) != bytes(generate(cfg, 12)));
}

TEST_CASE("dataset: defect twin differs only by a brighter blob") {
  const DatasetConfig cfg;
  const RawImage clean = synthesize_image(cfg, 99, false);
  const RawImage bad = synthesize_image(cfg, 99, true);
  int changed = 0;
  for (std::size_t i = 0; i < clean.pixels().size(); ++i) {
    CHECK(bad.pixels()[i] >= clean.pixels()[i]);
    if (bad.pixels()[i] != clean.pixels()[i]) ++changed;
  }
  CHECK(changed > 0);
  CHECK(changed < static_cast<int>(clean.pixels().size()));
}

TEST_CASE("dataset: config validation") {
  auto bad = [](auto mutate) {
    DatasetConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](DatasetConfig& c) { c.contamination = -0.1; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](DatasetConfig& c) { c.contamination = 0.51; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](DatasetConfig& c) { c.n_train = 9; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](DatasetConfig& c) { c.image_size = 10; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](DatasetConfig& c) { c.image_size = 4; }).validate(), std::invalid_argument);
  CHECK_NOTHROW(bad([](DatasetConfig& c) { c.contamination = 0.5; }).validate());
}

TEST_CASE("dataset: image pixel validation") {
  RawImage img(8, 0.5F);
  CHECK_NOTHROW(img.validate());
  img.at(2, 3) = 1.5F;
  CHECK_THROWS_AS(img.validate(), std::invalid_argument);
  img.at(2, 3) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(img.validate(), std::invalid_argument);
}

TEST_CASE("dataset: text round trip is exact") {
  const Dataset d = generate(small_config(0.25), 5);
  std::stringstream s;
  write_dataset(s, d);
  const Dataset back = read_dataset(s);
  CHECK(back == d);
  CHECK(bytes(back) == bytes(d));
}

TEST_CASE("dataset: parse errors carry line numbers") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_dataset(empty), ParseError);

  std::string text = bytes(generate(small_config(0.0), 1));
  // Corrupt one pixel on the third line.
  std::size_t pos = 0;
  for (int i = 0; i < 2; ++i) pos = text.find('\n', pos) + 1;
  const std::size_t comma = text.find(',', text.find(',', text.find(',', pos) + 1) + 1);
  text.replace(comma + 1, 1, "x");
  std::istringstream in(text);
  try {
    read_dataset(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("transforms: known pixel moves") {
  const RawImage img = ramp(8);
  const RawImage r180 = apply(Dihedral::rot180, img);
  const RawImage t = apply(Dihedral::transpose, img);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      CHECK(r180.at(r, c) == img.at(7 - r, 7 - c));
      CHECK(t.at(r, c) == img.at(c, r));
    }
}

TEST_CASE("transforms: rotations compose and reflections are involutions") {
  const RawImage img = ramp(8);
  const RawImage r1 = apply(Dihedral::rot90, img);
  CHECK(apply(Dihedral::rot90, r1) == apply(Dihedral::rot180, img));
  CHECK(apply(Dihedral::rot90, apply(Dihedral::rot180, img)) == apply(Dihedral::rot270, img));
  CHECK(apply(Dihedral::rot270, r1) == img);
  for (Dihedral f : {Dihedral::flip_horizontal, Dihedral::flip_vertical, Dihedral::transpose, Dihedral::anti_transpose}) {
    CHECK(apply(f, apply(f, img)) == img);
  }
}

TEST_CASE("transforms: the eight images are distinct and closed under composition") {
  const RawImage img = ramp(8);
  std::vector<RawImage> all = apply_transforms(img, 8);
  REQUIRE(all.size() == 8);
  CHECK(all[0] == img);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) CHECK_FALSE(all[i] == all[j]);
  for (Dihedral a : kDihedralOrder)
    for (Dihedral b : kDihedralOrder) {
      const RawImage ab = apply(a, apply(b, img));
      CHECK(std::find(all.begin(), all.end(), ab) != all.end());
    }
}

TEST_CASE("transforms: count validation") {
  TransformSpec spec;
  CHECK(spec.count(Phase::train) == 4);
  CHECK(spec.count(Phase::eval) == 8);
  CHECK(apply_transforms(ramp(8), spec, Phase::train).size() == 4);
  spec.count_eval = 9;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.count_eval = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
