#include "irp/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "text_util.hpp"

namespace irp {

namespace {

bool same_real(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

std::size_t keep_floor(const RefinementConfig& rc, std::size_t initial) {
  return static_cast<std::size_t>(std::ceil(rc.min_keep_fraction * static_cast<double>(initial)));
}

FlowModel fresh_model(const FeatureBank& bank, const TrainParams& tp) {
  return FlowModel::init(static_cast<int>(bank.dim()), tp.blocks, tp.hidden, tp.optimizer.seed, tp.clamp_alpha);
}

void require_train_size(const PreparedData& p) {
  if (p.train.size() < 10) throw std::invalid_argument("train split needs at least 10 samples");
}

}  // namespace

void RefinementConfig::validate() const {
  if (pretrain_epochs < 0) throw std::invalid_argument("irp.pretrain must be non-negative");
  if (epochs_per_cycle < 1) throw std::invalid_argument("irp.cycle_epochs must be at least 1");
  if (total_epoch_budget < pretrain_epochs) throw std::invalid_argument("train.budget must be at least irp.pretrain");
  if (!(threshold_multiplier > 0.0)) throw std::invalid_argument("irp.threshold_multiplier must be positive");
  if (!(min_keep_fraction >= 0.0 && min_keep_fraction <= 1.0)) {
    throw std::invalid_argument("irp.min_keep_fraction must be in [0, 1]");
  }
}

int RefinementConfig::cycles() const { return (total_epoch_budget - pretrain_epochs) / epochs_per_cycle; }

void TrainParams::validate() const {
  if (blocks < 1) throw std::invalid_argument("flow.blocks must be at least 1");
  if (hidden < 1) throw std::invalid_argument("flow.hidden must be at least 1");
  if (!(clamp_alpha > 0.0) || !std::isfinite(clamp_alpha)) throw std::invalid_argument("flow.clamp must be positive");
  optimizer.validate();
  transforms.validate();
}

double median(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("median of empty list");
  std::vector<double> v(scores.begin(), scores.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::optional<OutlierCandidate> select_outlier(const ScoreTable& table, double multiplier) {
  if (table.entries.empty()) throw std::invalid_argument("empty score table");
  const auto scores = table.scores();
  const double m = median(scores);
  const double thr = multiplier * m;
  const ScoreEntry* best = &table.entries.front();
  for (const auto& e : table.entries) {
    if (e.score > best->score || (e.score == best->score && e.id < best->id)) best = &e;
  }
  if (!(best->score > thr)) return std::nullopt;
  return OutlierCandidate{best->id, best->score, m, thr};
}

std::vector<OutlierCandidate> select_all_outliers(const ScoreTable& table, double multiplier) {
  if (table.entries.empty()) throw std::invalid_argument("empty score table");
  const double m = median(table.scores());
  const double thr = multiplier * m;
  std::vector<OutlierCandidate> out;
  for (const auto& e : table.entries) {
    if (e.score > thr) out.push_back({e.id, e.score, m, thr});
  }
  std::sort(out.begin(), out.end(), [](const OutlierCandidate& a, const OutlierCandidate& b) {
    return a.score > b.score || (a.score == b.score && a.id < b.id);
  });
  return out;
}

bool operator==(const RefinementEvent& a, const RefinementEvent& b) {
  return a.cycle == b.cycle && a.removed_id == b.removed_id && same_real(a.removed_score, b.removed_score) &&
         same_real(a.median, b.median) && same_real(a.threshold, b.threshold) &&
         a.train_size_before == b.train_size_before && a.train_size_after == b.train_size_after;
}

std::size_t RefinementLog::removal_count() const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [](const RefinementEvent& e) { return e.removed_id.has_value(); }));
}

std::vector<std::uint32_t> RefinementLog::removed_ids() const {
  std::vector<std::uint32_t> out;
  for (const auto& e : events) {
    if (e.removed_id) out.push_back(*e.removed_id);
  }
  return out;
}

void write_refinement_csv(std::ostream& out, const RefinementLog& log) {
  out << "cycle,removed_id,removed_score,median,threshold,train_size_before,train_size_after\n";
  for (const auto& e : log.events) {
    out << e.cycle << ',';
    if (e.removed_id) out << *e.removed_id << ',' << detail::format_g(e.removed_score, 17);
    else out << ',';
    out << ',' << detail::format_g(e.median, 17) << ',' << detail::format_g(e.threshold, 17) << ','
        << e.train_size_before << ',' << e.train_size_after << '\n';
  }
}

PreparedData prepare(const Dataset& d, const TransformSpec& transforms) {
  transforms.validate();
  PreparedData p;
  p.train = d.indices(Split::train);
  for (std::size_t i : p.train) p.train_ids.push_back(d.samples[i].id);
  if (p.train.size() < 2) throw std::invalid_argument("train split needs at least two samples");
  const auto raw = raw_features(d, p.train, transforms.count_train);
  p.normalizer = Normalizer::fit(raw);
  p.bank = FeatureBank::build(d, p.normalizer, std::max(transforms.count_train, transforms.count_eval));
  return p;
}

RunResult run_vanilla(const Dataset& d, int epochs, const TrainParams& tp) {
  tp.validate();
  return run_vanilla(d, prepare(d, tp.transforms), epochs, tp);
}

RunResult run_vanilla(const Dataset&, const PreparedData& prepared, int epochs, const TrainParams& tp) {
  tp.validate();
  if (epochs < 0) throw std::invalid_argument("epoch budget must be non-negative");
  if (prepared.train.empty()) throw std::invalid_argument("empty train split");
  Trainer trainer(fresh_model(prepared.bank, tp), tp.optimizer);
  RunResult r{trainer.model(), prepared.normalizer, {}, {}};
  r.train_log.seed = tp.optimizer.seed;
  trainer.run_epochs(prepared.bank, prepared.train, epochs, r.train_log);
  r.model = trainer.model();
  r.log.final_train_ids = prepared.train_ids;
  return r;
}

RunResult run_irp(const Dataset& d, const RefinementConfig& rc, const TrainParams& tp) {
  tp.validate();
  return run_irp(d, prepare(d, tp.transforms), rc, tp);
}

RunResult run_irp(const Dataset&, const PreparedData& prepared, const RefinementConfig& rc, const TrainParams& tp) {
  rc.validate();
  tp.validate();
  require_train_size(prepared);

  std::vector<std::size_t> active = prepared.train;
  std::vector<std::uint32_t> ids = prepared.train_ids;
  const std::size_t floor = keep_floor(rc, active.size());

  Trainer trainer(fresh_model(prepared.bank, tp), tp.optimizer);
  RunResult r{trainer.model(), prepared.normalizer, {}, {}};
  r.train_log.seed = tp.optimizer.seed;
  trainer.run_epochs(prepared.bank, active, rc.pretrain_epochs, r.train_log);

  const int cycles = rc.cycles();
  for (int cycle = 1; cycle <= cycles; ++cycle) {
    const ScoreTable table = score_bank(trainer.model(), prepared.bank, active, ids, tp.transforms.count_train,
                                        tp.score_mode, trainer.epochs_done());
    RefinementEvent ev;
    ev.cycle = cycle;
    ev.median = median(table.scores());
    ev.threshold = rc.threshold_multiplier * ev.median;
    ev.removed_score = std::numeric_limits<double>::quiet_NaN();
    ev.train_size_before = active.size();
    const auto cand = select_outlier(table, rc.threshold_multiplier);
    if (cand && active.size() > 1 && active.size() - 1 >= floor) {
      const auto pos = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), cand->id) - ids.begin());
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(pos));
      ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(pos));
      ev.removed_id = cand->id;
      ev.removed_score = cand->score;
    }
    ev.train_size_after = active.size();
    r.log.events.push_back(ev);

    if (!rc.warm_start) trainer.restart(fresh_model(prepared.bank, tp));
    trainer.run_epochs(prepared.bank, active, rc.epochs_per_cycle, r.train_log);
  }
  const int leftover = rc.total_epoch_budget - rc.pretrain_epochs - cycles * rc.epochs_per_cycle;
  trainer.run_epochs(prepared.bank, active, leftover, r.train_log);

  r.model = trainer.model();
  r.log.final_train_ids = ids;
  return r;
}

RunResult run_osr(const Dataset& d, const RefinementConfig& rc, const TrainParams& tp) {
  tp.validate();
  return run_osr(d, prepare(d, tp.transforms), rc, tp);
}

RunResult run_osr(const Dataset&, const PreparedData& prepared, const RefinementConfig& rc, const TrainParams& tp) {
  rc.validate();
  tp.validate();
  require_train_size(prepared);

  std::vector<std::size_t> active = prepared.train;
  std::vector<std::uint32_t> ids = prepared.train_ids;
  const std::size_t floor = keep_floor(rc, active.size());

  Trainer trainer(fresh_model(prepared.bank, tp), tp.optimizer);
  RunResult r{trainer.model(), prepared.normalizer, {}, {}};
  r.train_log.seed = tp.optimizer.seed;
  trainer.run_epochs(prepared.bank, active, rc.pretrain_epochs, r.train_log);

  const ScoreTable table = score_bank(trainer.model(), prepared.bank, active, ids, tp.transforms.count_train,
                                      tp.score_mode, trainer.epochs_done());
  const auto flagged = select_all_outliers(table, rc.threshold_multiplier);
  for (const auto& c : flagged) {
    if (active.size() <= 1 || active.size() - 1 < floor) break;
    const auto pos = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), c.id) - ids.begin());
    r.log.events.push_back(RefinementEvent{1, c.id, c.score, c.median, c.threshold, active.size(), active.size() - 1});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(pos));
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  if (!rc.warm_start && !flagged.empty()) trainer.restart(fresh_model(prepared.bank, tp));
  trainer.run_epochs(prepared.bank, active, rc.total_epoch_budget - rc.pretrain_epochs, r.train_log);
  r.model = trainer.model();
  r.log.final_train_ids = ids;
  return r;
}

}  // namespace irp
