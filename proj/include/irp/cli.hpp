#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace irp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Output files, all written under out.dir.
inline constexpr const char* kDatasetFile = "dataset.csv";
inline constexpr const char* kReportCsvFile = "report.csv";
inline constexpr const char* kReportSvgFile = "report.svg";
std::string checkpoint_file(const std::string& method);        // model_<method>.ckpt
std::string train_log_file(const std::string& method);         // trainlog_<method>.csv
std::string refinement_log_file(const std::string& method);    // refinement_<method>.csv
std::string score_file(const std::string& method, const std::string& split);  // scores_<method>_<split>.csv

/// Runs one command. `args` excludes the program name, e.g.
/// {"train", "--config", "run.cfg", "--method", "irp"}. Diagnostics go to `err`.
/// Returns 0 on success, 1 on usage/validation errors, 2 on runtime failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace irp::cli
