#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace irp {

/// Error raised while reading any of the project's text formats.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}

  /// 1-based line number, or 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class Label { normal, anomalous };
enum class Split { train, test };

const char* to_string(Label label);
const char* to_string(Split split);

/// Square grayscale image with pixel values in [0, 1].
///
/// Pixels are single precision so that the 9 significant digits written by
/// save_dataset reproduce every value exactly on load.
class RawImage {
 public:
  RawImage() = default;
  explicit RawImage(int size, float fill = 0.0F);
  RawImage(int size, std::vector<float> pixels);

  int size() const { return size_; }
  float at(int row, int col) const { return pixels_[static_cast<std::size_t>(row * size_ + col)]; }
  float& at(int row, int col) { return pixels_[static_cast<std::size_t>(row * size_ + col)]; }
  const std::vector<float>& pixels() const { return pixels_; }

  /// Throws std::invalid_argument unless every pixel is finite and in [0, 1].
  void validate() const;

  friend bool operator==(const RawImage&, const RawImage&) = default;

 private:
  int size_ = 0;
  std::vector<float> pixels_;
};

struct Sample {
  std::uint32_t id = 0;
  RawImage image;
  /// Ground truth. Read by evaluation and removal accounting only.
  Label true_label = Label::normal;
  Split split = Split::train;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetConfig {
  int n_train = 400;
  int n_test_normal = 100;
  int n_test_anomalous = 100;
  int image_size = 16;
  double contamination = 0.0;
  double defect_intensity = 0.1;
  double pixel_noise = 0.02;
  double wave_amplitude = 0.15;
  /// Blob radius bounds as fractions of the image size.
  double radius_min = 0.125;
  double radius_max = 0.25;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Dataset {
  std::vector<Sample> samples;
  std::uint64_t seed = 0;
  double contamination_rate = 0.0;
  int image_size = 0;

  /// Positions in `samples` belonging to the split, in dataset order.
  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const;
  std::size_t count(Split split, Label label) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Renders one synthetic surface. The background and pixel noise depend only
/// on `sample_seed`; the defect is drawn from a separate stream, so calling
/// this twice with the same seed and `with_defect` toggled yields an image and
/// its defect-free twin.
RawImage synthesize_image(const DatasetConfig& config, std::uint64_t sample_seed, bool with_defect);

/// Builds train samples (ids 0..n_train-1) followed by the test split (normal
/// first, then anomalous). Exactly round(contamination * n_train) train samples
/// carry a defect, at seeded positions.
Dataset generate(const DatasetConfig& config, std::uint64_t seed);

void write_dataset(std::ostream& out, const Dataset& d);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace irp
