#include "irp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "irp/rng.hpp"
#include "text_util.hpp"

namespace irp {

namespace {

constexpr std::uint64_t kTagBackground = 1;
constexpr std::uint64_t kTagDefect = 2;
constexpr std::uint64_t kTagLayout = 3;
constexpr std::uint64_t kTagSample = 4;

float clip01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

const char* to_string(Label label) { return label == Label::normal ? "normal" : "anomalous"; }
const char* to_string(Split split) { return split == Split::train ? "train" : "test"; }

RawImage::RawImage(int size, float fill) : size_(size), pixels_(static_cast<std::size_t>(size * size), fill) {
  if (size <= 0) throw std::invalid_argument("image size must be positive");
}

RawImage::RawImage(int size, std::vector<float> pixels) : size_(size), pixels_(std::move(pixels)) {
  if (size <= 0 || pixels_.size() != static_cast<std::size_t>(size * size)) {
    throw std::invalid_argument("pixel count does not match image size");
  }
}

void RawImage::validate() const {
  if (size_ <= 0) throw std::invalid_argument("empty image");
  for (float p : pixels_) {
    if (!std::isfinite(p) || p < 0.0F || p > 1.0F) {
      throw std::invalid_argument("pixel outside [0,1]");
    }
  }
}

void DatasetConfig::validate() const {
  if (!(contamination >= 0.0 && contamination <= 0.5)) {
    throw std::invalid_argument("dataset.contamination must be in [0, 0.5]");
  }
  if (n_train < 10) throw std::invalid_argument("dataset.n_train must be at least 10");
  if (n_test_normal < 0 || n_test_anomalous < 0) {
    throw std::invalid_argument("dataset test sizes must be non-negative");
  }
  if (image_size < 8 || image_size % 4 != 0) {
    throw std::invalid_argument("dataset.image_size must be a multiple of 4 and at least 8");
  }
  if (!(defect_intensity > 0.0)) throw std::invalid_argument("dataset.defect_intensity must be positive");
  if (!(pixel_noise >= 0.0)) throw std::invalid_argument("dataset.pixel_noise must be non-negative");
  if (!(wave_amplitude >= 0.0)) throw std::invalid_argument("dataset.wave_amplitude must be non-negative");
  if (!(radius_min > 0.0 && radius_min <= radius_max)) {
    throw std::invalid_argument("dataset radius bounds must satisfy 0 < min <= max");
  }
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == split) out.push_back(i);
  }
  return out;
}

std::size_t Dataset::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.split == split; }));
}

std::size_t Dataset::count(Split split, Label label) const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [&](const Sample& s) {
    return s.split == split && s.true_label == label;
  }));
}

RawImage synthesize_image(const DatasetConfig& config, std::uint64_t sample_seed, bool with_defect) {
  const int g = config.image_size;
  Rng background(sample_seed, kTagBackground);
  const double phase_x = background.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase_y = background.uniform(0.0, 2.0 * std::numbers::pi);
  const double w = 2.0 * std::numbers::pi / g;

  std::vector<double> values(static_cast<std::size_t>(g * g));
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      const double wave = config.wave_amplitude * (std::sin(w * (c + 0.5) + phase_x) + std::sin(w * (r + 0.5) + phase_y));
      values[static_cast<std::size_t>(r * g + c)] = 0.5 + wave + config.pixel_noise * background.normal();
    }
  }

  if (with_defect) {
    Rng defect(sample_seed, kTagDefect);
    const double cy = defect.uniform(0.0, g);
    const double cx = defect.uniform(0.0, g);
    const double radius = defect.uniform(config.radius_min * g, config.radius_max * g);
    for (int r = 0; r < g; ++r) {
      for (int c = 0; c < g; ++c) {
        const double dy = r + 0.5 - cy;
        const double dx = c + 0.5 - cx;
        if (dy * dy + dx * dx <= radius * radius) {
          values[static_cast<std::size_t>(r * g + c)] += config.defect_intensity;
        }
      }
    }
  }

  std::vector<float> pixels(values.size());
  std::transform(values.begin(), values.end(), pixels.begin(), clip01);
  return RawImage(g, std::move(pixels));
}

Dataset generate(const DatasetConfig& config, std::uint64_t seed) {
  config.validate();
  Dataset d;
  d.seed = seed;
  d.contamination_rate = config.contamination;
  d.image_size = config.image_size;

  const auto n_bad = static_cast<std::size_t>(std::lround(config.contamination * config.n_train));
  std::vector<Label> train_labels(static_cast<std::size_t>(config.n_train), Label::normal);
  std::fill_n(train_labels.begin(), n_bad, Label::anomalous);
  Rng layout(seed, kTagLayout);
  layout.shuffle(train_labels);

  const auto add = [&](Label label, Split split) {
    const auto id = static_cast<std::uint32_t>(d.samples.size());
    const std::uint64_t sample_seed = derive_seed(seed, (kTagSample << 32) | id);
    d.samples.push_back(Sample{id, synthesize_image(config, sample_seed, label == Label::anomalous), label, split});
  };
  for (Label label : train_labels) add(label, Split::train);
  for (int i = 0; i < config.n_test_normal; ++i) add(Label::normal, Split::test);
  for (int i = 0; i < config.n_test_anomalous; ++i) add(Label::anomalous, Split::test);
  return d;
}

// Format:
//   seed=<u64>,image_size=<g>,n_train=<n>,n_test=<m>,contamination_rate=<17 digits>
//   <id>,<train|test>,<normal|anomalous>,<g*g pixels, 9 significant digits>
void write_dataset(std::ostream& out, const Dataset& d) {
  out << "seed=" << d.seed << ",image_size=" << d.image_size << ",n_train=" << d.count(Split::train)
      << ",n_test=" << d.count(Split::test) << ",contamination_rate=" << detail::format_g(d.contamination_rate, 17)
      << '\n';
  for (const Sample& s : d.samples) {
    out << s.id << ',' << to_string(s.split) << ',' << to_string(s.true_label);
    for (float p : s.image.pixels()) out << ',' << detail::format_g(p, 9);
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  if (detail::trim(line).empty()) throw ParseError("missing manifest");

  Dataset d;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  bool seen[5] = {};
  for (std::string_view field : detail::split(detail::trim(line), ',')) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "malformed manifest field");
    const auto key = detail::trim(field.substr(0, eq));
    const auto value = field.substr(eq + 1);
    bool ok = false;
    if (key == "seed") {
      auto v = detail::parse_number<std::uint64_t>(value);
      ok = v.has_value();
      if (ok) d.seed = *v;
      seen[0] = true;
    } else if (key == "image_size") {
      auto v = detail::parse_number<int>(value);
      ok = v && *v > 0;
      if (ok) d.image_size = *v;
      seen[1] = true;
    } else if (key == "n_train") {
      auto v = detail::parse_number<std::size_t>(value);
      ok = v.has_value();
      if (ok) n_train = *v;
      seen[2] = true;
    } else if (key == "n_test") {
      auto v = detail::parse_number<std::size_t>(value);
      ok = v.has_value();
      if (ok) n_test = *v;
      seen[3] = true;
    } else if (key == "contamination_rate") {
      auto v = detail::parse_number<double>(value);
      ok = v.has_value();
      if (ok) d.contamination_rate = *v;
      seen[4] = true;
    } else {
      throw ParseError(line_no, "unknown manifest field '" + std::string(key) + "'");
    }
    if (!ok) throw ParseError(line_no, "bad value for manifest field '" + std::string(key) + "'");
  }
  for (bool s : seen) {
    if (!s) throw ParseError(line_no, "incomplete manifest");
  }

  const auto pixel_count = static_cast<std::size_t>(d.image_size * d.image_size);
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(detail::trim(line), ',');
    if (fields.size() != 3 + pixel_count) {
      throw ParseError(line_no, "expected " + std::to_string(3 + pixel_count) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    Sample s;
    const auto id = detail::parse_number<std::uint32_t>(fields[0]);
    if (!id) throw ParseError(line_no, "bad sample id");
    s.id = *id;
    const auto split = detail::trim(fields[1]);
    if (split == "train") {
      s.split = Split::train;
    } else if (split == "test") {
      s.split = Split::test;
    } else {
      throw ParseError(line_no, "bad split '" + std::string(split) + "'");
    }
    const auto label = detail::trim(fields[2]);
    if (label == "normal") {
      s.true_label = Label::normal;
    } else if (label == "anomalous") {
      s.true_label = Label::anomalous;
    } else {
      throw ParseError(line_no, "bad label '" + std::string(label) + "'");
    }
    std::vector<float> pixels(pixel_count);
    for (std::size_t k = 0; k < pixel_count; ++k) {
      const auto v = detail::parse_number<float>(fields[3 + k]);
      if (!v || !std::isfinite(*v) || *v < 0.0F || *v > 1.0F) {
        throw ParseError(line_no, "bad pixel value in column " + std::to_string(4 + k));
      }
      pixels[k] = *v;
    }
    s.image = RawImage(d.image_size, std::move(pixels));
    d.samples.push_back(std::move(s));
  }

  std::vector<std::uint32_t> ids;
  for (const Sample& s : d.samples) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ParseError("duplicate sample id");
  if (d.count(Split::train) != n_train || d.count(Split::test) != n_test) {
    throw ParseError("sample counts disagree with manifest");
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_dataset(out, d);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace irp
