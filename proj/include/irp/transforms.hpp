#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "irp/dataset.hpp"

namespace irp {

/// The eight symmetries of the square, in the fixed order used everywhere:
/// identity, rotations by 90/180/270 degrees counter-clockwise, then the
/// reflections about the vertical axis, the horizontal axis, the main
/// diagonal and the anti-diagonal.
enum class Dihedral : std::uint8_t {
  identity,
  rot90,
  rot180,
  rot270,
  flip_horizontal,
  flip_vertical,
  transpose,
  anti_transpose,
};

inline constexpr std::array<Dihedral, 8> kDihedralOrder = {
    Dihedral::identity,        Dihedral::rot90,         Dihedral::rot180,    Dihedral::rot270,
    Dihedral::flip_horizontal, Dihedral::flip_vertical, Dihedral::transpose, Dihedral::anti_transpose,
};

RawImage apply(Dihedral t, const RawImage& image);

enum class Phase { train, eval };

/// How many label-preserving transforms are averaged when scoring.
struct TransformSpec {
  int count_train = 4;
  int count_eval = 8;

  int count(Phase phase) const { return phase == Phase::train ? count_train : count_eval; }
  void validate() const;
};

/// First `count` dihedral images of `image`; element 0 is always an identity copy.
std::vector<RawImage> apply_transforms(const RawImage& image, int count);

inline std::vector<RawImage> apply_transforms(const RawImage& image, const TransformSpec& spec, Phase phase) {
  return apply_transforms(image, spec.count(phase));
}

}  // namespace irp
