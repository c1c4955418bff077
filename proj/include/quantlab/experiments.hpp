#pragma once

#include <string>
#include <vector>

#include "quantlab/trainer.hpp"

namespace quantlab::cli {

// One run of an experiment: identifier plus its full training configuration
// (config.run_id matches run_id).
struct RunPlan {
  std::string run_id;
  trainer::TrainConfig config;
};

struct ExperimentPreset {
  std::string name;
  std::vector<RunPlan> runs;
};

// The four figure-reproduction grids, at paper-scale epochs/updates:
//   fig3: none | ste_cl | ste_cl_120      (quantizer-free vs STE+CL vs 120-bit)
//   fig4: na | na_cl | ste | ste_cl       (commitment loss on/off)
//   fig5: na | na_cl | na_det | na_det_cl (attached vs detached noise)
//   fig6: ste | ste_cl | mste | mste_cl   (modified STE)
std::vector<ExperimentPreset> preset_catalog();

// Flat key=value config (one pair per line, '#' comments). Keys: epochs,
// updates_per_epoch, learning_rate, adam_beta1, adam_beta2, adam_eps,
// estimator, cl_weight, na_ratio_db, bits, p, n, seed, run_id.
trainer::TrainConfig parse_config_file(const std::string& path);

// Reads epoch-aggregate rows (update == -1) from the CSVs and renders one
// curve per run id. metric is "mse" or "ma_e"; ma_e defaults to a log y-axis.
void emit_plot(const std::vector<std::string>& csv_paths, const std::string& metric, const std::string& out_path,
               bool log_y);

// Full command-line front end. Returns the process exit code: 0 success,
// 2 configuration/usage error, 3 when at least one run diverged.
int cli_run(int argc, const char* const* argv);

}  // namespace quantlab::cli
