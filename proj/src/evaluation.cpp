#include "irp/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "text_util.hpp"

namespace irp {

double auroc(std::span<const ScoredLabel> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::int64_t n_pos = 0;
  for (const auto& s : samples) {
    if (std::isnan(s.score)) throw std::invalid_argument("NaN score");
    n_pos += s.anomalous ? 1 : 0;
  }
  const auto n_neg = static_cast<std::int64_t>(samples.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("AUROC needs both normal and anomalous samples");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return samples[a].score < samples[b].score; });

  // Twice the positive rank sum, kept integral: a tie group occupying 1-based
  // positions first..last gives every member the midrank (first+last)/2.
  std::int64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && samples[order[j + 1]].score == samples[order[i]].score) ++j;
    const auto twice_mid = static_cast<std::int64_t>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (samples[order[k]].anomalous) twice_rank_sum += twice_mid;
    }
    i = j + 1;
  }
  const std::int64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * n_pos * n_neg);
}

GoodBadCounts removal_accounting(const RefinementLog& log, const Dataset& d) {
  std::unordered_map<std::uint32_t, Label> labels;
  for (const auto& s : d.samples) labels.emplace(s.id, s.true_label);
  GoodBadCounts c;
  for (std::uint32_t id : log.removed_ids()) {
    const auto it = labels.find(id);
    if (it == labels.end()) throw std::invalid_argument("removed id " + std::to_string(id) + " not in dataset");
    if (it->second == Label::anomalous) ++c.bad_removed;
    else ++c.good_removed;
  }
  return c;
}

const char* to_string(Method m) {
  switch (m) {
    case Method::vanilla: return "vanilla";
    case Method::osr: return "osr";
    case Method::irp: return "irp";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  for (Method m : kMethodOrder) {
    if (text == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(text) + "'");
}

void SweepConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("sweep.seeds must not be empty");
  if (levels_percent.empty()) throw std::invalid_argument("sweep.levels must not be empty");
  for (double l : levels_percent) {
    if (!(l >= 0.0 && l <= 50.0)) throw std::invalid_argument("sweep.levels must lie in [0, 50]");
  }
  if (workers < 1) throw std::invalid_argument("sweep workers must be at least 1");
  DatasetConfig probe = data;
  probe.contamination = 0.0;
  probe.validate();
  refinement.validate();
  train.validate();
}

CellResult run_method(Method method, const Dataset& d, const PreparedData& prepared, const SweepConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r = [&] {
    switch (method) {
      case Method::vanilla: return run_vanilla(d, prepared, cfg.refinement.total_epoch_budget, cfg.train);
      case Method::osr: return run_osr(d, prepared, cfg.refinement, cfg.train);
      case Method::irp: return run_irp(d, prepared, cfg.refinement, cfg.train);
    }
    throw std::logic_error("bad method");
  }();

  const auto test = d.indices(Split::test);
  std::vector<std::uint32_t> ids;
  for (std::size_t i : test) ids.push_back(d.samples[i].id);
  const ScoreTable table =
      score_bank(r.model, prepared.bank, test, ids, cfg.train.transforms.count_eval, cfg.train.score_mode);
  std::vector<ScoredLabel> labelled;
  for (std::size_t k = 0; k < test.size(); ++k) {
    labelled.push_back({table.entries[k].score, d.samples[test[k]].true_label == Label::anomalous});
  }

  CellResult out;
  out.auroc = auroc(labelled);
  out.removed = removal_accounting(r.log, d);
  out.epochs = r.train_log.epochs();
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ExperimentReport noise_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t n_levels = cfg.levels_percent.size();
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_cells = n_levels * n_seeds;
  constexpr std::size_t n_methods = std::size(kMethodOrder);
  std::vector<CellResult> results(n_cells * n_methods);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::string error;

  const auto work = [&] {
    while (!failed.load()) {
      const std::size_t cell = next.fetch_add(1);
      if (cell >= n_cells) return;
      const double level = cfg.levels_percent[cell / n_seeds];
      const std::uint64_t seed = cfg.seeds[cell % n_seeds];
      try {
        DatasetConfig dc = cfg.data;
        dc.contamination = level / 100.0;
        const Dataset d = generate(dc, seed);
        SweepConfig local = cfg;
        local.train.optimizer.seed = seed;
        const PreparedData prepared = prepare(d, local.train.transforms);
        for (std::size_t m = 0; m < n_methods; ++m) {
          results[cell * n_methods + m] = run_method(kMethodOrder[m], d, prepared, local);
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!failed.exchange(true)) {
          error = "sweep cell (level=" + detail::format_g(level, 9) + "%, seed=" + std::to_string(seed) +
                  ") failed: " + e.what();
        }
      }
    }
  };

  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), n_cells));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failed) throw std::runtime_error(error);

  ExperimentReport report;
  for (std::size_t l = 0; l < n_levels; ++l) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const CellResult& c = results[(l * n_seeds + s) * n_methods + m];
        ReportRow row;
        row.noise_percent = cfg.levels_percent[l];
        row.method = kMethodOrder[m];
        row.seed = cfg.seeds[s];
        row.auroc = c.auroc;
        row.good_removed = c.removed.good_removed;
        row.bad_removed = c.removed.bad_removed;
        row.epochs = c.epochs;
        if (cfg.record_wall_time) row.wall_time = c.seconds;
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

std::vector<SummaryRow> summarize(const ExperimentReport& r) {
  // Canonical order: ascending level, then method.
  std::vector<double> levels;
  for (const auto& row : r.rows) levels.push_back(row.noise_percent);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<SummaryRow> out;
  for (double level : levels) {
    for (Method m : kMethodOrder) {
      SummaryRow s{level, m, 0, 0.0, 0.0, 0.0, 0.0};
      std::vector<double> values;
      for (const auto& row : r.rows) {
        if (row.noise_percent != level || row.method != m) continue;
        values.push_back(row.auroc);
        s.mean_good_removed += static_cast<double>(row.good_removed);
        s.mean_bad_removed += static_cast<double>(row.bad_removed);
      }
      if (values.empty()) continue;
      s.runs = values.size();
      const double n = static_cast<double>(values.size());
      s.mean_auroc = std::accumulate(values.begin(), values.end(), 0.0) / n;
      double var = 0.0;
      for (double v : values) var += (v - s.mean_auroc) * (v - s.mean_auroc);
      s.std_auroc = std::sqrt(var / n);
      s.mean_good_removed /= n;
      s.mean_bad_removed /= n;
      out.push_back(s);
    }
  }
  return out;
}

namespace {
constexpr std::string_view kReportHeader = "noise_level,method,seed,auroc,good_removed,bad_removed,epochs,wall_time";
}

std::string render_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << kReportHeader << '\n';
  for (const auto& row : r.rows) {
    out << detail::format_g(row.noise_percent, 9) << ',' << to_string(row.method) << ',' << row.seed << ','
        << detail::format_g(row.auroc, 17) << ',' << row.good_removed << ',' << row.bad_removed << ',' << row.epochs
        << ',';
    if (row.wall_time) out << detail::format_g(*row.wall_time, 6);
    out << '\n';
  }
  return out.str();
}

ExperimentReport parse_report_csv(std::string_view text) {
  ExperimentReport r;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (std::string_view line : detail::split(text, '\n')) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kReportHeader) throw ParseError(line_no, "unexpected report header");
      header_seen = true;
      continue;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 8) throw ParseError(line_no, "expected 8 fields");
    ReportRow row;
    const auto level = detail::parse_number<double>(f[0]);
    const auto seed = detail::parse_number<std::uint64_t>(f[2]);
    const auto auc = detail::parse_number<double>(f[3]);
    const auto good = detail::parse_number<std::size_t>(f[4]);
    const auto bad = detail::parse_number<std::size_t>(f[5]);
    const auto epochs = detail::parse_number<int>(f[6]);
    if (!level || !seed || !auc || !good || !bad || !epochs) throw ParseError(line_no, "bad numeric field");
    if (!(*auc >= 0.0 && *auc <= 1.0)) throw ParseError(line_no, "auroc outside [0,1]");
    try {
      row.method = parse_method(detail::trim(f[1]));
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
    row.noise_percent = *level;
    row.seed = *seed;
    row.auroc = *auc;
    row.good_removed = *good;
    row.bad_removed = *bad;
    row.epochs = *epochs;
    if (!detail::trim(f[7]).empty()) {
      const auto wt = detail::parse_number<double>(f[7]);
      if (!wt) throw ParseError(line_no, "bad wall_time");
      row.wall_time = *wt;
    }
    r.rows.push_back(row);
  }
  if (!header_seen) throw ParseError("empty report");
  return r;
}

std::string render_svg(const ExperimentReport& r) {
  if (r.rows.empty()) throw std::invalid_argument("empty report");
  const auto summary = summarize(r);

  constexpr double kWidth = 800;
  constexpr double kHeight = 500;
  constexpr double kLeft = 80;
  constexpr double kRight = 160;
  constexpr double kTop = 40;
  constexpr double kBottom = 70;
  const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c"};

  double x_min = summary.front().noise_percent;
  double x_max = x_min;
  double y_min = 1.0;
  for (const auto& s : summary) {
    x_min = std::min(x_min, s.noise_percent);
    x_max = std::max(x_max, s.noise_percent);
    y_min = std::min(y_min, s.mean_auroc - s.std_auroc);
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  y_min = std::max(0.0, std::floor(y_min * 20.0) / 20.0);
  if (y_min >= 1.0) y_min = 0.95;
  const double y_max = 1.0;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  const auto py = [&](double y) { return kTop + (y_max - std::clamp(y, y_min, y_max)) / (y_max - y_min) * plot_h; };
  const auto f2 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  o << "<line x1=\"" << f2(kLeft) << "\" y1=\"" << f2(kTop + plot_h) << "\" x2=\"" << f2(kLeft + plot_w) << "\" y2=\""
    << f2(kTop + plot_h) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << f2(kLeft) << "\" y1=\"" << f2(kTop) << "\" x2=\"" << f2(kLeft) << "\" y2=\"" << f2(kTop + plot_h)
    << "\" stroke=\"black\"/>\n";

  std::vector<double> levels;
  for (const auto& s : summary) {
    if (std::find(levels.begin(), levels.end(), s.noise_percent) == levels.end()) levels.push_back(s.noise_percent);
  }
  for (double l : levels) {
    o << "<text x=\"" << f2(px(l)) << "\" y=\"" << f2(kTop + plot_h + 20) << "\" font-size=\"12\" text-anchor=\"middle\">"
      << detail::format_g(l, 9) << "</text>\n";
  }
  const int y_ticks = 5;
  for (int k = 0; k <= y_ticks; ++k) {
    const double y = y_min + (y_max - y_min) * k / y_ticks;
    o << "<text x=\"" << f2(kLeft - 8) << "\" y=\"" << f2(py(y) + 4) << "\" font-size=\"12\" text-anchor=\"end\">"
      << f2(y) << "</text>\n";
  }
  o << "<text x=\"" << f2(kLeft + plot_w / 2) << "\" y=\"" << f2(kHeight - 20)
    << "\" font-size=\"14\" text-anchor=\"middle\">Noise level (%)</text>\n";
  o << "<text x=\"20\" y=\"" << f2(kTop + plot_h / 2) << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
    << f2(kTop + plot_h / 2) << ")\">Mean AUROC</text>\n";

  for (std::size_t mi = 0; mi < std::size(kMethodOrder); ++mi) {
    const Method m = kMethodOrder[mi];
    std::vector<const SummaryRow*> pts;
    for (const auto& s : summary) {
      if (s.method == m) pts.push_back(&s);
    }
    if (pts.empty()) continue;
    o << "<polyline fill=\"none\" stroke=\"" << colors[mi] << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k) {
      o << (k ? " " : "") << f2(px(pts[k]->noise_percent)) << ',' << f2(py(pts[k]->mean_auroc));
    }
    o << "\"/>\n";
    for (const SummaryRow* p : pts) {
      o << "<line x1=\"" << f2(px(p->noise_percent)) << "\" y1=\"" << f2(py(p->mean_auroc - p->std_auroc)) << "\" x2=\""
        << f2(px(p->noise_percent)) << "\" y2=\"" << f2(py(p->mean_auroc + p->std_auroc)) << "\" stroke=\"" << colors[mi]
        << "\"/>\n";
    }
    const double ly = kTop + 20.0 + 22.0 * static_cast<double>(mi);
    o << "<line x1=\"" << f2(kWidth - kRight + 20) << "\" y1=\"" << f2(ly) << "\" x2=\"" << f2(kWidth - kRight + 50)
      << "\" y2=\"" << f2(ly) << "\" stroke=\"" << colors[mi] << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << f2(kWidth - kRight + 58) << "\" y=\"" << f2(ly + 4) << "\" font-size=\"12\">" << to_string(m)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace irp
