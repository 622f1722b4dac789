// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// all pass. Usage: irp_acceptance <path-to-irp-binary> [work-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "irp/evaluation.hpp"
#include "irp/flow.hpp"
#include "irp/refinement.hpp"
#include "irp/rng.hpp"
#include "irp/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace irp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

void report(int n, const std::string& title, const Verdict& v) {
  std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << n << " (" << title << "):" << v.detail.str()
            << std::endl;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// 1. Round trip, log-det and gradient checks.
bool flow_correctness() {
  const auto t0 = Clock::now();
  Verdict v;

  double roundtrip = 0.0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const FlowModel m = oracle::random_model(36, 4, 64, s, 0.1);
    Rng rng(1000 + s);
    for (int i = 0; i < 100; ++i) {
      const FeatureVector y = oracle::random_vector(36, rng, 2.0);
      roundtrip = std::max(roundtrip, (inverse(m, forward(m, y).z) - y).cwiseAbs().maxCoeff());
    }
  }

  double logdet = 0.0;
  for (int d : {2, 4, 6}) {
    for (std::uint64_t s = 1; s <= 5; ++s) {
      const FlowModel m = oracle::random_model(d, 4, 16, 50 + s);
      Rng rng(60 + s);
      for (int i = 0; i < 10; ++i) {
        const FeatureVector y = oracle::random_vector(d, rng);
        const double numeric = std::log(std::abs(oracle::numerical_jacobian(m, y).determinant()));
        logdet = std::max(logdet, std::abs(forward(m, y).log_det - numeric));
      }
    }
  }

  double grad_rel = 0.0;
  std::size_t coords_checked = 0;
  for (std::uint64_t s = 1; s <= 2; ++s) {
    const FlowModel m = oracle::random_model(6, 3, 16, 70 + s, 0.4);
    Rng rng(80 + s);
    std::vector<FeatureVector> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(oracle::random_vector(6, rng, 1.5));
    const NllGrad g = nll_and_grad(m, batch);
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(m.parameter_count()));
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = static_cast<Eigen::Index>(i);
    rng.shuffle(coords);
    coords.resize(std::min<std::size_t>(coords.size(), 150));
    for (Eigen::Index i : coords) {
      const double fd = oracle::fd_gradient(m, batch, i);
      grad_rel = std::max(grad_rel, std::abs(fd - g.grad(i)) / std::max({std::abs(fd), std::abs(g.grad(i)), 1e-3}));
      ++coords_checked;
    }
  }

  const double elapsed = seconds_since(t0);
  v.detail << " round-trip max err " << fmt(roundtrip, 3) << " (< 1e-9); log_det max err " << fmt(logdet, 3)
           << " (<= 1e-5, d=2,4,6); gradient max rel err " << fmt(grad_rel, 3) << " over " << coords_checked
           << " coords (<= 1e-4); " << fmt(elapsed, 3) << " s (< 30 s)";
  v.require(roundtrip < 1e-9, "round trip");
  v.require(logdet <= 1e-5, "log_det");
  v.require(grad_rel <= 1e-4 && coords_checked >= 200, "gradient");
  v.require(elapsed < 30.0, "runtime");
  report(1, "flow correctness", v);
  return v.pass;
}

// 2. Entropy recovery and unit mass.
bool density_sanity() {
  const auto t0 = Clock::now();
  Verdict v;
  const int d = 4;
  Rng rng(2024);
  std::vector<FeatureVector> data;
  for (int i = 0; i < 500; ++i) data.push_back(oracle::random_vector(d, rng));
  TrainConfig cfg;
  cfg.seed = 7;
  const TrainResult r = train(FlowModel::init(d, 4, 64, 7), data, cfg, 60);
  const double nll = oracle::mean_nll(r.model, data);
  const double entropy = 0.5 * d * (1.0 + std::log(2.0 * std::numbers::pi));

  // Mass of a d=2 flow fitted to a skewed, shifted cloud.
  std::vector<FeatureVector> skewed;
  for (int i = 0; i < 500; ++i) {
    FeatureVector y(2);
    const double a = rng.normal();
    y << 1.0 + 0.6 * a, -0.5 + 0.5 * rng.normal() + 0.4 * a * a;
    skewed.push_back(y);
  }
  TrainConfig cfg2;
  cfg2.learning_rate = 2e-3;
  cfg2.seed = 8;
  const FlowModel m2 = train(FlowModel::init(2, 4, 32, 8), skewed, cfg2, 60).model;
  const double lim = 12.0;
  const double step = 0.04;
  double mass = 0.0;
  FeatureVector y(2);
  for (double a = -lim + step / 2; a < lim; a += step)
    for (double b = -lim + step / 2; b < lim; b += step) {
      y << a, b;
      mass += std::exp(log_prob(m2, y));
    }
  mass *= step * step;

  const double elapsed = seconds_since(t0);
  v.detail << " final mean NLL " << fmt(nll, 5) << " vs entropy " << fmt(entropy, 5) << " (|diff| <= 0.15); d=2 mass "
           << fmt(mass, 6) << " (|mass-1| <= 1e-2); " << fmt(elapsed, 3) << " s (< 60 s)";
  v.require(std::abs(nll - entropy) <= 0.15, "entropy");
  v.require(std::abs(mass - 1.0) <= 1e-2, "mass");
  v.require(elapsed < 60.0, "runtime");
  report(2, "density sanity", v);
  return v.pass;
}

// 3. AUROC against pair counting.
bool auroc_oracle() {
  Verdict v;
  Rng rng(31);
  int exact = 0;
  int with_ties = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 2 + rng.below(80);
    std::vector<ScoredLabel> s(n);
    const std::size_t distinct = 2 + rng.below(6);
    for (auto& x : s) {
      x.anomalous = rng.uniform() < 0.5;
      x.score = static_cast<double>(rng.below(distinct)) * 0.25;
    }
    s[0].anomalous = true;
    s[1].anomalous = false;
    std::vector<double> scores;
    for (const auto& x : s) scores.push_back(x.score);
    std::sort(scores.begin(), scores.end());
    if (std::adjacent_find(scores.begin(), scores.end()) != scores.end()) ++with_ties;
    if (auroc(s) == oracle::brute_force_auroc(s)) ++exact;
  }
  const double perfect = auroc(std::vector<ScoredLabel>{{0.1, false}, {0.2, false}, {0.3, true}, {0.9, true}});
  const double ties = auroc(std::vector<ScoredLabel>{{0.4, false}, {0.4, true}, {0.4, true}, {0.4, false}, {0.4, false}});
  v.detail << " " << exact << "/50 instances equal brute force (" << with_ties << " with ties); perfect separation "
           << perfect << "; all ties " << ties;
  v.require(exact == 50 && with_ties > 0, "brute force");
  v.require(perfect == 1.0, "perfect");
  v.require(ties == 0.5, "ties");
  report(3, "AUROC oracle", v);
  return v.pass;
}

// 4. Refinement loop mechanics.
bool refinement_mechanics() {
  Verdict v;
  DatasetConfig dc;
  dc.n_train = 100;
  dc.n_test_normal = 20;
  dc.n_test_anomalous = 20;
  dc.contamination = 0.2;
  TrainParams tp;
  tp.blocks = 2;
  tp.hidden = 32;
  RefinementConfig rc;
  rc.pretrain_epochs = 10;
  rc.total_epoch_budget = 40;

  std::size_t removals = 0;
  std::size_t violations = 0;
  std::size_t multi = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Dataset d = generate(dc, seed);
    tp.optimizer.seed = seed;
    for (double t : {1.05, 1.2}) {
      rc.threshold_multiplier = t;
      const RunResult r = run_irp(d, rc, tp);
      std::map<int, int> per_cycle;
      for (const auto& e : r.log.events) {
        if (!e.removed_id) continue;
        ++removals;
        ++per_cycle[e.cycle];
        if (!(e.removed_score > t * e.median) || e.threshold != t * e.median) ++violations;
        if (e.train_size_before - e.train_size_after != 1) ++violations;
      }
      for (const auto& [c, k] : per_cycle) {
        if (k > 1) ++multi;
      }
    }
  }

  const Dataset d = generate(dc, 9);
  tp.optimizer.seed = 9;
  rc.threshold_multiplier = 1e9;
  const RunResult quiet = run_irp(d, rc, tp);
  const RunResult vanilla = run_vanilla(d, rc.total_epoch_budget, tp);
  std::ostringstream a;
  std::ostringstream b;
  write_checkpoint(a, quiet.model);
  write_checkpoint(b, vanilla.model);
  const bool identical = quiet.log.removal_count() == 0 && quiet.train_log == vanilla.train_log && a.str() == b.str();

  rc.threshold_multiplier = 1.1;
  const RunResult r1 = run_irp(d, rc, tp);
  const RunResult r2 = run_irp(d, rc, tp);
  std::ostringstream c1;
  std::ostringstream c2;
  write_refinement_csv(c1, r1.log);
  write_refinement_csv(c2, r2.log);
  write_checkpoint(c1, r1.model);
  write_checkpoint(c2, r2.model);
  const bool replay = r1.log == r2.log && r1.train_log == r2.train_log && c1.str() == c2.str();

  v.detail << " " << removals << " removals checked, " << violations << " threshold violations, " << multi
           << " cycles with >1 removal; no-outlier run identical to vanilla: " << (identical ? "yes" : "no")
           << "; bitwise replay: " << (replay ? "yes" : "no");
  v.require(removals > 0 && violations == 0, "strict threshold");
  v.require(multi == 0, "one per cycle");
  v.require(identical, "no-outlier equals vanilla");
  v.require(replay, "replay");
  report(4, "refinement mechanics", v);
  return v.pass;
}

struct LevelStats {
  double vanilla = 0.0;
  double osr = 0.0;
  double irp = 0.0;
  double precision = 0.0;  // mean over seeds of bad / removed, IRP
  std::size_t max_removed = 0;
  std::size_t bad_removed = 0;
};

std::map<double, LevelStats> level_stats(const ExperimentReport& r, std::size_t seeds) {
  std::map<double, LevelStats> out;
  for (const auto& s : summarize(r)) {
    auto& l = out[s.noise_percent];
    (s.method == Method::vanilla ? l.vanilla : s.method == Method::osr ? l.osr : l.irp) = s.mean_auroc;
  }
  for (const auto& row : r.rows) {
    if (row.method != Method::irp) continue;
    auto& l = out[row.noise_percent];
    const std::size_t total = row.good_removed + row.bad_removed;
    l.max_removed = std::max(l.max_removed, total);
    l.bad_removed += row.bad_removed;
    // A seed without removals contributes zero precision.
    if (total > 0) l.precision += static_cast<double>(row.bad_removed) / static_cast<double>(total) / seeds;
  }
  return out;
}

// 5 and 6 share one sweep.
std::pair<bool, bool> benchmark(const fs::path& work) {
  SweepConfig cfg;
  cfg.workers = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  const auto t0 = Clock::now();
  const ExperimentReport r = noise_sweep(cfg);
  const double elapsed = seconds_since(t0);
  fs::create_directories(work);
  std::ofstream(work / "benchmark_report.csv") << render_csv(r);
  std::ofstream(work / "benchmark_report.svg") << render_svg(r);

  const auto stats = level_stats(r, cfg.seeds.size());
  std::cout << "  benchmark: n_train " << cfg.data.n_train << ", d " << kFeatureDim << ", " << cfg.seeds.size()
            << " seeds, " << cfg.workers << " worker(s), " << fmt(elapsed, 4) << " s\n";
  std::cout << "  level  vanilla  osr      irp      irp_removed_max  irp_precision\n";
  for (const auto& [level, l] : stats) {
    std::printf("  %4.0f%%  %.4f   %.4f   %.4f   %15zu  %.3f\n", level, l.vanilla, l.osr, l.irp, l.max_removed,
                l.precision);
  }

  Verdict v5;
  bool decreasing = true;
  double prev = 2.0;
  for (const auto& [level, l] : stats) {
    if (!(l.vanilla < prev)) decreasing = false;
    prev = l.vanilla;
  }
  bool ordered = true;
  bool margin = true;
  for (const auto& [level, l] : stats) {
    if (level >= 20 && !(l.irp >= l.vanilla)) ordered = false;
    if (level >= 30 && !(l.irp - l.vanilla >= 0.02)) margin = false;
  }
  const LevelStats& clean = stats.at(0.0);
  const double gap = std::abs(clean.irp - clean.vanilla);
  v5.detail << " (a) vanilla strictly decreasing: " << (decreasing ? "yes" : "no")
            << "; (b) irp >= vanilla at >=20%: " << (ordered ? "yes" : "no")
            << ", margin >= 0.02 at 30-50%: " << (margin ? "yes" : "no") << " (min margin "
            << fmt(std::min({stats.at(30.0).irp - stats.at(30.0).vanilla, stats.at(40.0).irp - stats.at(40.0).vanilla,
                             stats.at(50.0).irp - stats.at(50.0).vanilla}),
                   3)
            << "); (c) |irp - vanilla| at 0% = " << fmt(gap, 3) << " (<= 0.02); sweep " << fmt(elapsed, 4)
            << " s (< 600 s)";
  v5.require(decreasing, "(a)");
  v5.require(ordered && margin, "(b)");
  v5.require(gap <= 0.02, "(c)");
  v5.require(elapsed < 600.0, "runtime");
  report(5, "trend reproduction", v5);

  Verdict v6;
  const std::size_t cap = static_cast<std::size_t>(0.1 * cfg.data.n_train);
  bool precise = true;
  double worst_precision = 1.0;
  for (const auto& [level, l] : stats) {
    if (level < 20) continue;
    worst_precision = std::min(worst_precision, l.precision);
    if (!(l.precision >= 0.6)) precise = false;
  }
  v6.detail << " at 0%: bad_removed " << clean.bad_removed << ", max removals per run " << clean.max_removed
            << " (<= " << cap << "); at >=20%: min mean precision " << fmt(worst_precision, 3) << " (>= 0.6)";
  v6.require(clean.bad_removed == 0 && clean.max_removed <= cap, "clean removals");
  v6.require(precise, "precision");
  report(6, "removal accounting", v6);
  return {v5.pass, v6.pass};
}

int run_cli(const std::string& exe, const std::string& args) {
  const std::string cmd = "\"" + exe + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out[e.path().filename().string()] = oracle::read_file(e.path());
  }
  return out;
}

// 7. Byte-identical CLI outputs.
bool reproducibility(const std::string& exe, const fs::path& work) {
  Verdict v;
  const fs::path root = work / "repro";
  fs::remove_all(root);
  fs::create_directories(root);

  const auto write_cfg = [&](const fs::path& out, int workers) {
    const fs::path p = root / ("run_" + out.filename().string() + ".cfg");
    std::ofstream(p) << "dataset.n_train = 60\ndataset.n_test_normal = 15\ndataset.n_test_anomalous = 15\n"
                        "dataset.contamination = 0.2\nflow.blocks = 2\nflow.hidden = 16\ntrain.budget = 12\n"
                        "irp.pretrain = 4\nsweep.levels = 0, 20, 40\nsweep.seeds = 1, 2\nsweep.workers = "
                     << workers << "\nseed = 5\nout.dir = " << out.string() << "\n";
    return p.string();
  };
  const std::vector<std::string> commands = {
      "gen-data",
      "train -m vanilla",
      "train -m osr",
      "train -m irp",
      "score -m vanilla -s test",
      "score -m osr -s test",
      "score -m irp -s test",
      "score -m irp -s train",
      "sweep",
      "report",
  };

  std::vector<std::map<std::string, std::string>> runs;
  int failures = 0;
  for (const auto& [name, workers] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 1}, {"c", 3}}) {
    const fs::path out = root / name;
    const std::string cfg = write_cfg(out, workers);
    for (const auto& c : commands) {
      if (run_cli(exe, c + " -c \"" + cfg + "\"") != 0) ++failures;
    }
    runs.push_back(snapshot(out));
  }
  const bool repeat = runs[0] == runs[1];
  const bool workers = runs[0] == runs[2];
  v.detail << " " << commands.size() << " commands x 3 runs, " << runs[0].size() << " output files, " << failures
           << " command failures; repeated runs identical: " << (repeat ? "yes" : "no")
           << "; 1 vs 3 workers identical: " << (workers ? "yes" : "no");
  v.require(failures == 0 && runs[0].size() >= 12, "commands");
  v.require(repeat, "repeat");
  v.require(workers, "workers");
  report(7, "reproducibility", v);
  return v.pass;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: irp_acceptance <irp-binary> [work-dir]\n";
    return 2;
  }
  const std::string exe = argv[1];
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::path("acceptance_out");
  const auto run = [](int n, const char* title, auto&& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      std::cout << "FAIL  criterion " << n << " (" << title << "): error: " << e.what() << std::endl;
      return false;
    }
  };

  int passed = 0;
  passed += run(1, "flow correctness", [] { return flow_correctness(); });
  passed += run(2, "density sanity", [] { return density_sanity(); });
  passed += run(3, "AUROC oracle", [] { return auroc_oracle(); });
  passed += run(4, "refinement mechanics", [] { return refinement_mechanics(); });
  try {
    const auto [c5, c6] = benchmark(work);
    passed += c5;
    passed += c6;
  } catch (const std::exception& e) {
    std::cout << "FAIL  criterion 5 (trend reproduction): error: " << e.what() << '\n';
    std::cout << "FAIL  criterion 6 (removal accounting): error: " << e.what() << '\n';
  }
  passed += run(7, "reproducibility", [&] { return reproducibility(exe, work); });
  std::cout << passed << "/7 criteria passed\n";
  return passed == 7 ? 0 : 1;
}
