#include "quantlab/experiments.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "quantlab/svg_plot.hpp"

namespace quantlab::cli {

namespace {

namespace fs = std::filesystem;
using estimators::EstimatorKind;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDiverged = 3;

RunPlan make_run(const std::string& run_id, EstimatorKind kind, double cl_weight, int quantizer_bits) {
  RunPlan run;
  run.run_id = run_id;
  run.config.run_id = run_id;
  run.config.estimator.kind = kind;
  run.config.estimator.cl_weight = cl_weight;
  run.config.quantizer = estimators::QuantizerSpec::for_bits(quantizer_bits);
  return run;
}

struct ParsedCsv {
  // per run id, in first-appearance order: (epoch, mse, ma_e) aggregates
  std::vector<std::string> run_order;
  std::map<std::string, std::vector<std::array<double, 3>>> epochs;
};

ParsedCsv read_epoch_rows(const std::vector<std::string>& csv_paths) {
  ParsedCsv parsed;
  for (const std::string& path : csv_paths) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open CSV " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("empty CSV " + path);
    if (line != trainer::csv_header())
      throw std::invalid_argument("CSV " + path + " has unexpected schema '" + line + "'");
    bool any = false;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ss, field, ',')) fields.push_back(field);
      if (fields.size() != 6) throw std::invalid_argument("CSV " + path + " has a malformed row: " + line);
      const int update = std::stoi(fields[2]);
      any = true;
      if (update != -1) continue;
      const std::string& run_id = fields[0];
      if (parsed.epochs.find(run_id) == parsed.epochs.end()) parsed.run_order.push_back(run_id);
      parsed.epochs[run_id].push_back(
          {std::stod(fields[1]), std::stod(fields[3]), std::stod(fields[4])});
    }
    if (!any) throw std::invalid_argument("CSV " + path + " holds no data rows");
  }
  if (parsed.run_order.empty()) throw std::invalid_argument("no epoch-aggregate rows found in the given CSVs");
  return parsed;
}

struct RunOutput {
  trainer::RunSummary summary;
  std::string csv_path;
  std::string error;  // non-empty when the run failed outright
};

// Executes the runs (at most `jobs` in parallel), streaming each run's
// metrics to <dir>/<run_id>.csv.
std::vector<RunOutput> execute_runs(const std::vector<RunPlan>& runs, const fs::path& dir, int jobs) {
  std::vector<RunOutput> outputs(runs.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      RunOutput& out = outputs[i];
      out.csv_path = (dir / (runs[i].run_id + ".csv")).string();
      try {
        std::ofstream csv(out.csv_path);
        if (!csv) throw std::runtime_error("cannot open " + out.csv_path + " for writing");
        csv << trainer::csv_header() << "\n";
        out.summary = trainer::run_training(
            runs[i].config, [&csv](const trainer::MetricsRecord& r) { csv << trainer::csv_line(r) << "\n"; });
        csv.flush();
        if (!csv) throw std::runtime_error("write failed for " + out.csv_path);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(runs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return outputs;
}

void write_summary_json(const fs::path& path, const std::string& group, const std::vector<RunOutput>& outputs) {
  nlohmann::json runs = nlohmann::json::array();
  for (const RunOutput& out : outputs) {
    runs.push_back({{"run_id", out.summary.run_id},
                    {"final_mse", out.summary.final_mse},
                    {"min_mse", out.summary.min_mse},
                    {"final_ma_e", out.summary.final_ma_e},
                    {"max_ma_e", out.summary.max_ma_e},
                    {"diverged", out.summary.diverged},
                    {"epochs_completed", out.summary.epochs_completed},
                    {"wall_time_seconds", out.summary.wall_time_seconds}});
  }
  const nlohmann::json doc = {{"group", group}, {"runs", runs}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << doc.dump(2) << "\n";
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

struct RunCliArgs {
  std::string preset;
  std::string config_file;
  std::string estimator = "ste";
  double cl_weight = 0.0;
  double na_ratio_db = 4.0;
  int bits = 2;
  int epochs = 0;   // 0 = not set explicitly
  int updates = 0;  // 0 = not set explicitly
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  bool paper_scale = false;
  std::string out_dir;
};

int do_run(const RunCliArgs& args, const CLI::App& run_cmd) {
  const bool epochs_set = run_cmd.count("--epochs") > 0;
  const bool updates_set = run_cmd.count("--updates") > 0;
  const bool estimator_flags_used = run_cmd.count("--estimator") || run_cmd.count("--cl") ||
                                    run_cmd.count("--na-db") || run_cmd.count("--bits");

  std::vector<RunPlan> runs;
  std::string group;
  if (!args.preset.empty()) {
    if (estimator_flags_used) {
      std::cerr << "error: --estimator/--cl/--na-db/--bits cannot be combined with --preset\n";
      return kExitConfigError;
    }
    const auto catalog = preset_catalog();
    const ExperimentPreset* preset = nullptr;
    for (const auto& p : catalog) {
      if (p.name == args.preset) preset = &p;
    }
    if (preset == nullptr) {
      std::cerr << "error: unknown preset '" << args.preset << "' (available: fig3 fig4 fig5 fig6)\n";
      return kExitConfigError;
    }
    runs = preset->runs;
    group = preset->name;
  } else if (!args.config_file.empty()) {
    RunPlan run;
    run.config = parse_config_file(args.config_file);
    if (run_cmd.count("--estimator")) run.config.estimator.kind = estimators::estimator_from_string(args.estimator);
    if (run_cmd.count("--cl")) run.config.estimator.cl_weight = args.cl_weight;
    if (run_cmd.count("--na-db")) run.config.estimator.na_ratio_db = args.na_ratio_db;
    if (run_cmd.count("--bits")) run.config.quantizer = estimators::QuantizerSpec::for_bits(args.bits);
    run.run_id = run.config.run_id;
    runs.push_back(std::move(run));
    group = "custom";
  } else {
    const EstimatorKind kind = estimators::estimator_from_string(args.estimator);
    std::string run_id = estimators::to_string(kind);
    if (args.cl_weight > 0.0) run_id += "_cl";
    if (args.bits == 4) run_id += "_120";
    RunPlan run = make_run(run_id, kind, args.cl_weight, args.bits);
    run.config.estimator.na_ratio_db = args.na_ratio_db;
    runs.push_back(std::move(run));
    group = "custom";
  }

  // Presets and ad-hoc runs default to the short schedule unless
  // --paper-scale asks for the full one; a config file speaks for itself.
  const bool scale_defaults_apply = args.config_file.empty() && !args.paper_scale;
  for (RunPlan& run : runs) {
    if (epochs_set) {
      run.config.epochs = args.epochs;
    } else if (scale_defaults_apply) {
      run.config.epochs = 15;
    }
    if (updates_set) {
      run.config.updates_per_epoch = args.updates;
    } else if (scale_defaults_apply) {
      run.config.updates_per_epoch = 400;
    }
    if (args.seed_set) {
      run.config.seed = args.seed;
      run.config.data.seed = args.seed;
    }
    run.config.validate();
  }

  const fs::path dir = fs::path(args.out_dir) / group;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << dir << ": " << ec.message() << "\n";
    return kExitConfigError;
  }

  const std::vector<RunOutput> outputs = execute_runs(runs, dir, args.jobs);
  for (const RunOutput& out : outputs) {
    if (!out.error.empty()) {
      std::cerr << "error: run failed: " << out.error << "\n";
      return kExitConfigError;
    }
  }

  write_summary_json(dir / "summary.json", group, outputs);
  std::vector<std::string> csvs;
  for (const RunOutput& out : outputs) csvs.push_back(out.csv_path);
  emit_plot(csvs, "mse", (dir / "mse.svg").string(), false);
  emit_plot(csvs, "ma_e", (dir / "ma_e.svg").string(), true);

  bool any_diverged = false;
  for (const RunOutput& out : outputs) {
    std::cout << out.summary.run_id << ": final_mse=" << out.summary.final_mse
              << " final_ma_e=" << out.summary.final_ma_e << " epochs=" << out.summary.epochs_completed
              << (out.summary.diverged ? " DIVERGED" : "") << "\n";
    any_diverged = any_diverged || out.summary.diverged;
  }
  std::cout << "wrote " << (dir / "summary.json").string() << "\n";
  return any_diverged ? kExitDiverged : kExitOk;
}

}  // namespace

std::vector<ExperimentPreset> preset_catalog() {
  std::vector<ExperimentPreset> catalog;
  catalog.push_back({"fig3",
                     {make_run("none", EstimatorKind::kNone, 0.0, 2), make_run("ste_cl", EstimatorKind::kSte, 0.1, 2),
                      make_run("ste_cl_120", EstimatorKind::kSte, 0.1, 4)}});
  catalog.push_back({"fig4",
                     {make_run("na", EstimatorKind::kNa, 0.0, 2), make_run("na_cl", EstimatorKind::kNa, 0.1, 2),
                      make_run("ste", EstimatorKind::kSte, 0.0, 2), make_run("ste_cl", EstimatorKind::kSte, 0.1, 2)}});
  catalog.push_back(
      {"fig5",
       {make_run("na", EstimatorKind::kNa, 0.0, 2), make_run("na_cl", EstimatorKind::kNa, 0.1, 2),
        make_run("na_det", EstimatorKind::kNaDet, 0.0, 2), make_run("na_det_cl", EstimatorKind::kNaDet, 0.1, 2)}});
  catalog.push_back({"fig6",
                     {make_run("ste", EstimatorKind::kSte, 0.0, 2), make_run("ste_cl", EstimatorKind::kSte, 0.1, 2),
                      make_run("mste", EstimatorKind::kMste, 0.0, 2),
                      make_run("mste_cl", EstimatorKind::kMste, 0.1, 2)}});
  return catalog;
}

trainer::TrainConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file " + path);
  trainer::TrainConfig cfg;
  cfg.run_id = "run";
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected key=value, got '" + stripped +
                                  "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    try {
      if (key == "epochs") {
        cfg.epochs = std::stoi(value);
      } else if (key == "updates_per_epoch") {
        cfg.updates_per_epoch = std::stoi(value);
      } else if (key == "learning_rate") {
        cfg.learning_rate = std::stod(value);
      } else if (key == "adam_beta1") {
        cfg.adam_beta1 = std::stod(value);
      } else if (key == "adam_beta2") {
        cfg.adam_beta2 = std::stod(value);
      } else if (key == "adam_eps") {
        cfg.adam_eps = std::stod(value);
      } else if (key == "estimator") {
        cfg.estimator.kind = estimators::estimator_from_string(value);
      } else if (key == "cl_weight") {
        cfg.estimator.cl_weight = std::stod(value);
      } else if (key == "na_ratio_db") {
        cfg.estimator.na_ratio_db = std::stod(value);
      } else if (key == "bits") {
        cfg.quantizer = estimators::QuantizerSpec::for_bits(std::stoi(value));
      } else if (key == "p") {
        cfg.data.p = std::stoi(value);
      } else if (key == "n") {
        cfg.data.n = std::stoi(value);
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
        cfg.data.seed = cfg.seed;
      } else if (key == "run_id") {
        cfg.run_id = value;
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": value out of range for '" + key + "'");
    }
  }
  return cfg;
}

void emit_plot(const std::vector<std::string>& csv_paths, const std::string& metric, const std::string& out_path,
               bool log_y) {
  if (metric != "mse" && metric != "ma_e")
    throw std::invalid_argument("metric must be mse or ma_e, got '" + metric + "'");
  const ParsedCsv parsed = read_epoch_rows(csv_paths);
  std::vector<Series> series;
  for (const std::string& run_id : parsed.run_order) {
    Series s;
    s.label = run_id;
    for (const auto& row : parsed.epochs.at(run_id)) s.points.emplace_back(row[0], metric == "mse" ? row[1] : row[2]);
    series.push_back(std::move(s));
  }
  ChartOptions opt;
  opt.title = metric == "mse" ? "training MSE per epoch" : "embedding MA-E per epoch";
  opt.y_label = metric == "mse" ? "MSE" : "MA-E";
  opt.log_y = log_y;
  const std::string svg = render_line_chart(series, opt);
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + out_path + " for writing");
  os << svg;
  if (!os) throw std::runtime_error("write failed for " + out_path);
}

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"quantization-effects test bench for neural codec training"};
  app.require_subcommand(1);

  RunCliArgs ra;
  CLI::App* run_cmd = app.add_subcommand("run", "train one configuration or a named preset");
  auto* preset_opt = run_cmd->add_option("--preset", ra.preset, "preset name: fig3, fig4, fig5 or fig6");
  auto* config_opt = run_cmd->add_option("--config", ra.config_file, "flat key=value config file");
  preset_opt->excludes(config_opt);
  config_opt->excludes(preset_opt);
  run_cmd->add_option("--estimator", ra.estimator, "none|ste|mste|na|na_det (single-run mode)");
  run_cmd->add_option("--cl", ra.cl_weight, "commitment-loss weight (0 disables)");
  run_cmd->add_option("--na-db", ra.na_ratio_db, "embedding-to-noise ratio in dB, range [0, 8]");
  run_cmd->add_option("--bits", ra.bits, "quantizer bits per value: 2 or 4");
  run_cmd->add_option("--epochs", ra.epochs, "epochs (default 15, or 100 with --paper-scale)");
  run_cmd->add_option("--updates", ra.updates, "updates per epoch (default 400, or 2000 with --paper-scale)");
  run_cmd->add_option("--seed", ra.seed, "seed for init, data and noise streams")->each([&ra](const std::string&) {
    ra.seed_set = true;
  });
  run_cmd->add_option("--jobs", ra.jobs, "parallel runs within a preset")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--paper-scale", ra.paper_scale, "use the full 100x2000 training schedule");
  run_cmd->add_option("--out", ra.out_dir, "output directory")->required();

  std::string plot_metric, plot_out;
  std::vector<std::string> plot_csvs;
  bool plot_log_y = false;
  CLI::App* plot_cmd = app.add_subcommand("plot", "render curves from run CSVs to SVG");
  plot_cmd->add_option("--metric", plot_metric, "mse or ma_e")->required();
  plot_cmd->add_option("--out", plot_out, "output SVG path")->required();
  plot_cmd->add_flag("--log-y", plot_log_y, "force a log y-axis (default for ma_e)");
  plot_cmd->add_option("csvs", plot_csvs, "input CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run_cmd->parsed()) return do_run(ra, *run_cmd);
    if (plot_cmd->parsed()) {
      const bool log_y = plot_log_y || plot_metric == "ma_e";
      emit_plot(plot_csvs, plot_metric, plot_out, log_y);
      std::cout << "wrote " << plot_out << "\n";
      return kExitOk;
    }
    std::cerr << "error: no subcommand given\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace quantlab::cli
