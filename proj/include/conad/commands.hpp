#pragma once

#include <string>

#include "conad/config.hpp"

namespace conad {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

// Maps the exception currently being handled to an exit code.
int exit_code_for_current_exception();

// Each command validates the configuration, writes its outputs into out_dir
// and echoes the configuration there as config.txt.

// dataset.txt plus one file per split.
void cmd_gen(const ExperimentConfig& cfg, const std::string& out_dir);

// model.ckpt, train_report.csv and train_summary.txt.
void cmd_train(const ExperimentConfig& cfg, const std::string& data_dir, const std::string& out_dir);

// scores.csv, roc.csv, eval_summary.txt and SVG figures. `split` selects
// test (default), train or valid; the latter two hold no anomalies and are
// rejected.
void cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint, const std::string& data_dir,
              const std::string& out_dir, const std::string& split = "test");

// report.txt and figures of one demonstration. Returns whether it passed.
bool cmd_demo(const std::string& which, const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace conad
