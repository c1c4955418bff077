#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "quantlab/codec_model.hpp"
#include "quantlab/datagen.hpp"
#include "quantlab/estimators.hpp"

namespace quantlab::trainer {

using numerics::Mat;

struct TrainConfig {
  int epochs = 100;
  int updates_per_epoch = 2000;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  estimators::EstimatorConfig estimator;
  estimators::QuantizerSpec quantizer;
  datagen::DataSpec data;
  std::uint64_t seed = 1;
  std::string run_id = "run";

  void validate() const;  // throws std::invalid_argument on bad settings
};

// Standard Adam with bias correction; one slot per parameter in model
// traversal order.
struct AdamState {
  struct Slot {
    Mat m;
    Mat v;
  };
  std::vector<Slot> slots;
  long t = 0;

  void init(const std::vector<autodiff::Param*>& params);
  void step(const std::vector<autodiff::Param*>& params, double lr, double beta1, double beta2, double eps);
};

// One log row. update == -1 marks a per-epoch aggregate (arithmetic mean of
// that epoch's update rows).
struct MetricsRecord {
  std::string run_id;
  int epoch = 0;
  int update = 0;
  double mse = 0.0;
  double ma_e = 0.0;
  double cl = 0.0;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

// CSV schema: run_id,epoch,update,mse,ma_e,cl; floats with 17 significant
// digits so rows round-trip bit-exactly.
std::string csv_header();
std::string csv_line(const MetricsRecord& r);

struct StepResult {
  double mse = 0.0;
  double ma_e = 0.0;
  double cl = 0.0;   // unweighted commitment-loss value; 0 for the none bridge
  double loss = 0.0;
};

struct RunSummary {
  std::string run_id;
  double final_mse = 0.0;
  double min_mse = 0.0;
  double final_ma_e = 0.0;
  double max_ma_e = 0.0;
  bool diverged = false;
  int epochs_completed = 0;
  double wall_time_seconds = 0.0;
};

// Mean absolute value over all elements.
double ma_e(const Mat& e);

// Runaway heuristic over the epoch-mean MA-E history: true when the last ten
// epochs are strictly increasing, grow at least 3x across that window, and the
// window already starts at 3.0 or above (twice the outermost default quantizer
// level). Healthy runs settle near or inside the level grid and drift far more
// slowly; runs that detach the noise scale or pass raw gradients through the
// quantizer triple well before they overflow.
bool runaway_ma_e(const std::vector<double>& epoch_ma_e);

// One optimization step on a fresh graph build: forward, losses, backward,
// Adam update. Metrics come from this step's forward pass (pre-update).
StepResult train_step(codec::CodecModel& model, AdamState& adam, const TrainConfig& cfg,
                      const datagen::DataBatch& batch, numerics::Prng& noise_prng, autodiff::Graph& g);

// Full training run: fixed rotation per run (unless data.resample_q), fresh
// batch per update (unless !data.resample_x), per-update and per-epoch rows
// pushed to sink. Divergence policy: a non-finite loss or MA-E above 1e12
// aborts the run (finite history is preserved); a runaway_ma_e() hit on the
// epoch history marks the run diverged but lets it finish, mirroring
// runaway-but-finite training.
RunSummary run_training(const TrainConfig& cfg, const MetricsSink& sink);

// Inference-mode MSE on held-out data: hard quantizer for every estimator
// kind except none. Uses the rotation derived from data.seed, so it matches
// the rotation a run with this spec trained against.
double evaluate(codec::CodecModel& model, estimators::EstimatorKind kind, const estimators::QuantizerSpec& quantizer,
                const datagen::DataSpec& data, int n_frames);

}  // namespace quantlab::trainer
