#include "irp/transforms.hpp"

#include <stdexcept>

namespace irp {

RawImage apply(Dihedral t, const RawImage& image) {
  const int g = image.size();
  const int m = g - 1;
  RawImage out(g);
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      // (sr, sc): source pixel that lands at (r, c).
      int sr = r;
      int sc = c;
      switch (t) {
        case Dihedral::identity: break;
        case Dihedral::rot90: sr = c; sc = m - r; break;
        case Dihedral::rot180: sr = m - r; sc = m - c; break;
        case Dihedral::rot270: sr = m - c; sc = r; break;
        case Dihedral::flip_horizontal: sc = m - c; break;
        case Dihedral::flip_vertical: sr = m - r; break;
        case Dihedral::transpose: sr = c; sc = r; break;
        case Dihedral::anti_transpose: sr = m - c; sc = m - r; break;
      }
      out.at(r, c) = image.at(sr, sc);
    }
  }
  return out;
}

void TransformSpec::validate() const {
  if (count_train < 1 || count_train > 8) throw std::invalid_argument("score.count_train must be in [1, 8]");
  if (count_eval < 1 || count_eval > 8) throw std::invalid_argument("score.count_eval must be in [1, 8]");
}

std::vector<RawImage> apply_transforms(const RawImage& image, int count) {
  if (count < 1 || count > 8) throw std::invalid_argument("transform count must be in [1, 8]");
  std::vector<RawImage> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(apply(kDihedralOrder[static_cast<std::size_t>(i)], image));
  return out;
}

}  // namespace irp
