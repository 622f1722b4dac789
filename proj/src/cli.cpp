#include "irp/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "irp/config.hpp"
#include "irp/evaluation.hpp"
#include "irp/refinement.hpp"
#include "irp/scoring.hpp"
#include "text_util.hpp"

namespace irp::cli {

namespace fs = std::filesystem;

std::string checkpoint_file(const std::string& method) { return "model_" + method + ".ckpt"; }
std::string train_log_file(const std::string& method) { return "trainlog_" + method + ".csv"; }
std::string refinement_log_file(const std::string& method) { return "refinement_" + method + ".csv"; }
std::string score_file(const std::string& method, const std::string& split) {
  return "scores_" + method + "_" + split + ".csv";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunConfig config_from(const std::string& path) { return path.empty() ? parse_config("") : load_config(path); }

void gen_data(const RunConfig& c, std::ostream& out) {
  fs::create_directories(c.out_dir);
  const Dataset d = generate(c.dataset, c.seed);
  save_dataset(d, c.out_dir / kDatasetFile);
  out << "wrote " << (c.out_dir / kDatasetFile).string() << " (" << d.count(Split::train) << " train, "
      << d.count(Split::test) << " test)\n";
}

void train_cmd(const RunConfig& c, Method method, std::ostream& out) {
  const Dataset d = load_dataset(c.out_dir / kDatasetFile);
  TrainParams tp = c.train;
  tp.optimizer.seed = c.seed;
  const PreparedData prepared = prepare(d, tp.transforms);
  RunResult r = [&] {
    switch (method) {
      case Method::vanilla: return run_vanilla(d, prepared, c.irp.total_epoch_budget, tp);
      case Method::osr: return run_osr(d, prepared, c.irp, tp);
      case Method::irp: return run_irp(d, prepared, c.irp, tp);
    }
    throw std::logic_error("bad method");
  }();

  const std::string name = to_string(method);
  save_checkpoint(r.model, c.out_dir / checkpoint_file(name));
  std::ostringstream tl;
  tl << "epoch,nll\n";
  for (std::size_t e = 0; e < r.train_log.epoch_nll.size(); ++e) {
    tl << e << ',' << detail::format_g(r.train_log.epoch_nll[e], 17) << '\n';
  }
  write_text(c.out_dir / train_log_file(name), tl.str());
  std::ostringstream rl;
  write_refinement_csv(rl, r.log);
  write_text(c.out_dir / refinement_log_file(name), rl.str());

  const GoodBadCounts counts = removal_accounting(r.log, d);
  out << name << ": " << r.train_log.epochs() << " epochs, final nll "
      << detail::format_g(r.train_log.epoch_nll.empty() ? 0.0 : r.train_log.epoch_nll.back(), 6) << ", removed "
      << counts.total() << " (" << counts.good_removed << " normal, " << counts.bad_removed << " anomalous)\n";
}

void score_cmd(const RunConfig& c, Method method, Split split, std::ostream& out) {
  const Dataset d = load_dataset(c.out_dir / kDatasetFile);
  const FlowModel model = load_checkpoint(c.out_dir / checkpoint_file(to_string(method)));
  const PreparedData prepared = prepare(d, c.train.transforms);
  const int count = c.train.transforms.count(split == Split::train ? Phase::train : Phase::eval);
  const ScoreTable table = score_dataset(model, prepared.normalizer, d, split, count, c.train.score_mode);
  std::ostringstream s;
  write_score_csv(s, table);
  const fs::path path = c.out_dir / score_file(to_string(method), to_string(split));
  write_text(path, s.str());
  out << "wrote " << path.string() << " (" << table.entries.size() << " rows)";
  if (split == Split::test) {
    std::unordered_map<std::uint32_t, Label> labels;
    for (const auto& smp : d.samples) labels.emplace(smp.id, smp.true_label);
    std::vector<ScoredLabel> labelled;
    for (const auto& e : table.entries) labelled.push_back({e.score, labels.at(e.id) == Label::anomalous});
    if (d.count(Split::test, Label::normal) > 0 && d.count(Split::test, Label::anomalous) > 0) {
      out << ", auroc " << detail::format_g(auroc(labelled), 6);
    }
  }
  out << '\n';
}

void sweep_cmd(const RunConfig& c, int workers, bool timing, std::ostream& out) {
  SweepConfig s = c.sweep();
  if (workers > 0) s.workers = workers;
  s.record_wall_time = timing;
  fs::create_directories(c.out_dir);
  const ExperimentReport r = noise_sweep(s);
  write_text(c.out_dir / kReportCsvFile, render_csv(r));
  out << "wrote " << (c.out_dir / kReportCsvFile).string() << " (" << r.rows.size() << " rows)\n";
  for (const auto& row : summarize(r)) {
    out << "  level " << detail::format_g(row.noise_percent, 9) << "% " << to_string(row.method) << ": auroc "
        << detail::format_g(row.mean_auroc, 4) << " +- " << detail::format_g(row.std_auroc, 2) << ", removed normal "
        << detail::format_g(row.mean_good_removed, 3) << " anomalous " << detail::format_g(row.mean_bad_removed, 3)
        << '\n';
  }
}

void report_cmd(const RunConfig& c, const std::string& input, std::ostream& out) {
  const fs::path in = input.empty() ? c.out_dir / kReportCsvFile : fs::path(input);
  const ExperimentReport r = parse_report_csv(read_text(in));
  fs::create_directories(c.out_dir);
  write_text(c.out_dir / kReportSvgFile, render_svg(r));
  out << "wrote " << (c.out_dir / kReportSvgFile).string() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Iterative refinement for robust flow-based anomaly detection"};
  app.name("irp");
  app.require_subcommand(1);

  std::string config_path;
  std::string method_name = "irp";
  std::string split_name = "test";
  std::string report_input;
  int workers = 0;
  bool timing = false;

  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value config file (defaults when omitted)");
  };
  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_config(gen);
  CLI::App* train = app.add_subcommand("train", "train one method and write checkpoint and logs");
  add_config(train);
  train->add_option("-m,--method", method_name, "vanilla | osr | irp")->check(CLI::IsMember({"vanilla", "osr", "irp"}));
  CLI::App* score = app.add_subcommand("score", "score a split with a trained checkpoint");
  add_config(score);
  score->add_option("-m,--method", method_name, "checkpoint to use")->check(CLI::IsMember({"vanilla", "osr", "irp"}));
  score->add_option("-s,--split", split_name, "train | test")->check(CLI::IsMember({"train", "test"}));
  CLI::App* sweep = app.add_subcommand("sweep", "run the noise sweep for all methods");
  add_config(sweep);
  sweep->add_option("-w,--workers", workers, "parallel cells (overrides sweep.workers)")->check(CLI::PositiveNumber);
  sweep->add_flag("--timing", timing, "record per-run wall time in the report");
  CLI::App* report = app.add_subcommand("report", "render report.csv as an SVG chart");
  add_config(report);
  report->add_option("-i,--input", report_input, "report CSV (default out.dir/report.csv)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitValidation;
  }

  RunConfig cfg;
  try {
    cfg = config_from(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }

  try {
    if (gen->parsed()) {
      gen_data(cfg, out);
    } else if (train->parsed()) {
      train_cmd(cfg, parse_method(method_name), out);
    } else if (score->parsed()) {
      score_cmd(cfg, parse_method(method_name), split_name == "train" ? Split::train : Split::test, out);
    } else if (sweep->parsed()) {
      sweep_cmd(cfg, workers, timing, out);
    } else if (report->parsed()) {
      report_cmd(cfg, report_input, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace irp::cli
