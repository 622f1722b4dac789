#include "irp/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include "text_util.hpp"

namespace irp {

namespace {

using Setter = std::function<bool(RunConfig&, std::string_view)>;

template <typename T>
bool assign(T& dst, std::string_view v) {
  const auto parsed = detail::parse_number<T>(v);
  if (!parsed) return false;
  if constexpr (std::is_floating_point_v<T>) {
    if (std::isnan(*parsed)) return false;
  }
  dst = *parsed;
  return true;
}

bool assign_bool(bool& dst, std::string_view v) {
  v = detail::trim(v);
  if (v == "true" || v == "1" || v == "yes") {
    dst = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    dst = false;
    return true;
  }
  return false;
}

template <typename T>
bool assign_list(std::vector<T>& dst, std::string_view v) {
  std::vector<T> out;
  for (std::string_view item : detail::split(v, ',')) {
    const auto parsed = detail::parse_number<T>(item);
    if (!parsed) return false;
    out.push_back(*parsed);
  }
  dst = std::move(out);
  return true;
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"dataset.n_train", [](RunConfig& c, std::string_view v) { return assign(c.dataset.n_train, v); }},
      {"dataset.n_test_normal", [](RunConfig& c, std::string_view v) { return assign(c.dataset.n_test_normal, v); }},
      {"dataset.n_test_anomalous", [](RunConfig& c, std::string_view v) { return assign(c.dataset.n_test_anomalous, v); }},
      {"dataset.image_size", [](RunConfig& c, std::string_view v) { return assign(c.dataset.image_size, v); }},
      {"dataset.contamination", [](RunConfig& c, std::string_view v) { return assign(c.dataset.contamination, v); }},
      {"dataset.defect_intensity", [](RunConfig& c, std::string_view v) { return assign(c.dataset.defect_intensity, v); }},
      {"dataset.pixel_noise", [](RunConfig& c, std::string_view v) { return assign(c.dataset.pixel_noise, v); }},
      {"dataset.wave_amplitude", [](RunConfig& c, std::string_view v) { return assign(c.dataset.wave_amplitude, v); }},
      {"flow.blocks", [](RunConfig& c, std::string_view v) { return assign(c.train.blocks, v); }},
      {"flow.hidden", [](RunConfig& c, std::string_view v) { return assign(c.train.hidden, v); }},
      {"flow.clamp", [](RunConfig& c, std::string_view v) { return assign(c.train.clamp_alpha, v); }},
      {"train.lr", [](RunConfig& c, std::string_view v) { return assign(c.train.optimizer.learning_rate, v); }},
      {"train.batch_size", [](RunConfig& c, std::string_view v) { return assign(c.train.optimizer.batch_size, v); }},
      {"train.budget", [](RunConfig& c, std::string_view v) { return assign(c.irp.total_epoch_budget, v); }},
      {"irp.pretrain", [](RunConfig& c, std::string_view v) { return assign(c.irp.pretrain_epochs, v); }},
      {"irp.cycle_epochs", [](RunConfig& c, std::string_view v) { return assign(c.irp.epochs_per_cycle, v); }},
      {"irp.threshold_multiplier", [](RunConfig& c, std::string_view v) { return assign(c.irp.threshold_multiplier, v); }},
      {"irp.warm_start", [](RunConfig& c, std::string_view v) { return assign_bool(c.irp.warm_start, v); }},
      {"irp.min_keep_fraction", [](RunConfig& c, std::string_view v) { return assign(c.irp.min_keep_fraction, v); }},
      {"score.mode",
       [](RunConfig& c, std::string_view v) {
         try {
           c.train.score_mode = parse_score_mode(detail::trim(v));
           return true;
         } catch (const std::invalid_argument&) {
           return false;
         }
       }},
      {"score.count_train", [](RunConfig& c, std::string_view v) { return assign(c.train.transforms.count_train, v); }},
      {"score.count_eval", [](RunConfig& c, std::string_view v) { return assign(c.train.transforms.count_eval, v); }},
      {"sweep.levels", [](RunConfig& c, std::string_view v) { return assign_list(c.levels_percent, v); }},
      {"sweep.seeds", [](RunConfig& c, std::string_view v) { return assign_list(c.seeds, v); }},
      {"sweep.workers", [](RunConfig& c, std::string_view v) { return assign(c.workers, v); }},
      {"out.dir",
       [](RunConfig& c, std::string_view v) {
         v = detail::trim(v);
         if (v.empty()) return false;
         c.out_dir = std::string(v);
         return true;
       }},
      {"seed", [](RunConfig& c, std::string_view v) { return assign(c.seed, v); }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  try {
    dataset.validate();
    train.validate();
    irp.validate();
    sweep().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

SweepConfig RunConfig::sweep() const {
  SweepConfig s;
  s.data = dataset;
  s.levels_percent = levels_percent;
  s.seeds = seeds;
  s.refinement = irp;
  s.train = train;
  s.workers = workers;
  return s;
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  for (std::string_view line : detail::split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    if (!it->second(c, value)) throw ConfigError(where + "malformed value for " + key + ": '" + std::string(value) + "'");
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace irp
