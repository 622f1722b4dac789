#include "irp/scoring.hpp"

#include <ostream>
#include <stdexcept>
#include <string>

#include "text_util.hpp"

namespace irp {

namespace {

// Mean over transform columns of -log p_Z(z) (minus log_det in full mode).
double mean_nll(const Eigen::Ref<const Eigen::MatrixXd>& z, const Eigen::Ref<const Eigen::VectorXd>& log_det,
                ScoreMode mode) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    double nll = -log_prior(z.col(k));
    if (mode == ScoreMode::full_likelihood) nll -= log_det(k);
    sum += nll;
  }
  return sum / static_cast<double>(z.cols());
}

}  // namespace

const char* to_string(ScoreMode mode) { return mode == ScoreMode::prior_only ? "prior_only" : "full_likelihood"; }

ScoreMode parse_score_mode(std::string_view text) {
  if (text == "prior_only") return ScoreMode::prior_only;
  if (text == "full_likelihood") return ScoreMode::full_likelihood;
  throw std::invalid_argument("unknown score mode '" + std::string(text) + "'");
}

std::vector<double> ScoreTable::scores() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.score);
  return out;
}

double score_sample(const FlowModel& m, const Normalizer& norm, const RawImage& image, int transform_count, ScoreMode mode) {
  if (norm.dim() != m.dim()) throw std::invalid_argument("normalizer dimension does not match flow dimension");
  const auto images = apply_transforms(image, transform_count);
  Eigen::MatrixXd y(m.dim(), transform_count);
  for (int k = 0; k < transform_count; ++k) {
    const FeatureVector f = norm.apply(extract(images[static_cast<std::size_t>(k)]));
    if (!f.allFinite()) throw std::invalid_argument("non-finite features");
    y.col(k) = f;
  }
  Eigen::MatrixXd z;
  Eigen::VectorXd ld;
  forward_batch(m, y, z, ld);
  return mean_nll(z, ld, mode);
}

ScoreTable score_dataset(const FlowModel& m, const Normalizer& norm, const Dataset& d, Split split, int transform_count,
                         ScoreMode mode, int model_epoch) {
  const auto idx = d.indices(split);
  if (idx.empty()) throw std::invalid_argument(std::string("split '") + to_string(split) + "' is empty");
  ScoreTable t;
  t.model_epoch = model_epoch;
  t.transform_count = transform_count;
  t.entries.reserve(idx.size());
  for (std::size_t i : idx) {
    t.entries.push_back({d.samples[i].id, score_sample(m, norm, d.samples[i].image, transform_count, mode)});
  }
  return t;
}

ScoreTable score_bank(const FlowModel& m, const FeatureBank& bank, std::span<const std::size_t> samples,
                      std::span<const std::uint32_t> ids, int transform_count, ScoreMode mode, int model_epoch) {
  if (samples.empty()) throw std::invalid_argument("nothing to score");
  if (samples.size() != ids.size()) throw std::invalid_argument("sample/id count mismatch");
  if (transform_count < 1 || transform_count > bank.views()) {
    throw std::invalid_argument("transform count exceeds the views stored in the feature bank");
  }
  if (bank.dim() != m.dim()) throw std::invalid_argument("feature dimension does not match flow dimension");

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd y(m.dim(), n * transform_count);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int v = 0; v < transform_count; ++v) {
      y.col(i * transform_count + v) = bank.column(samples[static_cast<std::size_t>(i)], v);
    }
  }
  Eigen::MatrixXd z;
  Eigen::VectorXd ld;
  forward_batch(m, y, z, ld);

  ScoreTable t;
  t.model_epoch = model_epoch;
  t.transform_count = transform_count;
  t.entries.reserve(samples.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto zi = z.middleCols(i * transform_count, transform_count);
    const auto ldi = ld.segment(i * transform_count, transform_count);
    t.entries.push_back({ids[static_cast<std::size_t>(i)], mean_nll(zi, ldi, mode)});
  }
  return t;
}

void write_score_csv(std::ostream& out, const ScoreTable& table) {
  out << "id,score\n";
  for (const auto& e : table.entries) out << e.id << ',' << detail::format_g(e.score, 9) << '\n';
}

}  // namespace irp
