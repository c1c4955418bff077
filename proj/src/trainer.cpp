#include "quantlab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace quantlab::trainer {

namespace {

constexpr double kMaEAbortThreshold = 1e12;
constexpr int kGrowthWindow = 10;
constexpr double kGrowthFactor = 3.0;
constexpr double kGrowthFloor = 3.0;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

bool runaway_ma_e(const std::vector<double>& epoch_ma_e) {
  const size_t n = epoch_ma_e.size();
  if (n < static_cast<size_t>(kGrowthWindow)) return false;
  const double start = epoch_ma_e[n - kGrowthWindow];
  if (!(start >= kGrowthFloor)) return false;
  for (size_t i = n - kGrowthWindow + 1; i < n; ++i) {
    if (!(epoch_ma_e[i] > epoch_ma_e[i - 1])) return false;
  }
  return epoch_ma_e[n - 1] >= kGrowthFactor * start;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (updates_per_epoch < 1) throw std::invalid_argument("config: updates_per_epoch must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw std::invalid_argument("config: adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw std::invalid_argument("config: adam_beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("config: adam_eps must be positive");
  if (!(estimator.cl_weight >= 0.0)) throw std::invalid_argument("config: cl weight must be non-negative");
  if (!(estimator.na_ratio_db >= 0.0 && estimator.na_ratio_db <= 8.0))
    throw std::invalid_argument("config: na_ratio_db must be in [0, 8]");
  quantizer.bits_per_value();  // validates the level grid
  datagen::validate(data);
  if (run_id.empty()) throw std::invalid_argument("config: run_id must be non-empty");
}

void AdamState::init(const std::vector<autodiff::Param*>& params) {
  slots.clear();
  slots.reserve(params.size());
  for (autodiff::Param* p : params) slots.push_back({Mat(p->value.rows(), p->value.cols()),
                                                     Mat(p->value.rows(), p->value.cols())});
  t = 0;
}

void AdamState::step(const std::vector<autodiff::Param*>& params, double lr, double beta1, double beta2, double eps) {
  if (slots.size() != params.size()) throw std::logic_error("adam: state does not match parameter list");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    autodiff::Param& p = *params[i];
    Mat& m = slots[i].m;
    Mat& v = slots[i].v;
    for (int j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = beta1 * m[j] + (1.0 - beta1) * g;
      v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
      p.value[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
    }
  }
}

std::string csv_header() { return "run_id,epoch,update,mse,ma_e,cl"; }

std::string csv_line(const MetricsRecord& r) {
  return r.run_id + "," + std::to_string(r.epoch) + "," + std::to_string(r.update) + "," + fmt17(r.mse) + "," +
         fmt17(r.ma_e) + "," + fmt17(r.cl);
}

double ma_e(const Mat& e) {
  if (e.empty()) throw std::invalid_argument("ma_e: empty matrix");
  // Four-lane partial sums: deterministic order, not serialized on one
  // accumulator.
  const double* p = e.data();
  const int sz = e.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= sz; i += 4) {
    s0 += std::fabs(p[i]);
    s1 += std::fabs(p[i + 1]);
    s2 += std::fabs(p[i + 2]);
    s3 += std::fabs(p[i + 3]);
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < sz; ++i) s += std::fabs(p[i]);
  return s / sz;
}

StepResult train_step(codec::CodecModel& model, AdamState& adam, const TrainConfig& cfg,
                      const datagen::DataBatch& batch, numerics::Prng& noise_prng, autodiff::Graph& g) {
  g.clear();
  autodiff::Tensor y = g.constant_like(batch.y);
  autodiff::Tensor e = codec::encode(g, model, y);
  estimators::BridgeResult bridge = estimators::apply_bridge(e, cfg.estimator, cfg.quantizer, noise_prng);
  autodiff::Tensor x_hat = codec::decode(g, model, bridge.d_in);
  autodiff::Tensor l_mse = g.mse(x_hat, g.constant_like(batch.x_q));

  StepResult out;
  out.mse = l_mse.value()[0];
  out.ma_e = ma_e(e.value());

  autodiff::Tensor loss = l_mse;
  const bool has_quantizer = cfg.estimator.kind != estimators::EstimatorKind::kNone;
  if (has_quantizer && cfg.estimator.cl_weight > 0.0) {
    autodiff::Tensor l_cl = estimators::commitment_loss(e, bridge.e_q);
    out.cl = l_cl.value()[0];
    loss = g.add(l_mse, g.mul(l_cl, g.scalar(cfg.estimator.cl_weight)));
  } else if (has_quantizer) {
    // Unweighted diagnostic only; no backward pass through it is wanted, so
    // reuse the mse op on two untracked nodes instead of growing the loss.
    out.cl = g.mse(g.stop_grad(e), bridge.e_q).value()[0];
  }
  out.loss = loss.value()[0];

  codec::zero_grads(model);
  g.backward(loss);
  std::vector<autodiff::Param*> params = codec::parameters(model);
  adam.step(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  return out;
}

RunSummary run_training(const TrainConfig& cfg, const MetricsSink& sink) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  codec::CodecModel model = codec::init_params(cfg.seed, cfg.data.p);
  AdamState adam;
  adam.init(codec::parameters(model));

  numerics::Prng rotation_prng(cfg.data.seed, numerics::Stream::kRotation);
  numerics::Prng data_prng(cfg.data.seed, numerics::Stream::kData);
  numerics::Prng noise_prng(cfg.seed, numerics::Stream::kNoise);

  numerics::RotationMatrix q = numerics::qr_rotation(rotation_prng, cfg.data.p);
  datagen::DataBatch batch;
  if (!cfg.data.resample_x) batch = datagen::make_batch(cfg.data, q, data_prng);

  RunSummary summary;
  summary.run_id = cfg.run_id;
  std::vector<double> epoch_ma_e_history;
  autodiff::Graph g;
  bool aborted = false;

  for (int epoch = 1; epoch <= cfg.epochs && !aborted; ++epoch) {
    double sum_mse = 0.0, sum_ma_e = 0.0, sum_cl = 0.0;
    int done = 0;
    for (int update = 1; update <= cfg.updates_per_epoch; ++update) {
      if (cfg.data.resample_q) q = numerics::qr_rotation(rotation_prng, cfg.data.p);
      if (cfg.data.resample_x) datagen::fill_batch(cfg.data, q, data_prng, batch);
      const StepResult step = train_step(model, adam, cfg, batch, noise_prng, g);
      if (!std::isfinite(step.loss) || !std::isfinite(step.ma_e)) {
        summary.diverged = true;  // drop the non-finite row, keep the history
        aborted = true;
        break;
      }
      sum_mse += step.mse;
      sum_ma_e += step.ma_e;
      sum_cl += step.cl;
      ++done;
      sink(MetricsRecord{cfg.run_id, epoch, update, step.mse, step.ma_e, step.cl});
      if (step.ma_e > kMaEAbortThreshold) {
        summary.diverged = true;
        aborted = true;
        break;
      }
    }
    if (done == 0) break;
    const MetricsRecord agg{cfg.run_id, epoch, -1, sum_mse / done, sum_ma_e / done, sum_cl / done};
    sink(agg);
    epoch_ma_e_history.push_back(agg.ma_e);
    summary.final_mse = agg.mse;
    summary.final_ma_e = agg.ma_e;
    summary.min_mse = summary.epochs_completed == 0 ? agg.mse : std::min(summary.min_mse, agg.mse);
    summary.max_ma_e = summary.epochs_completed == 0 ? agg.ma_e : std::max(summary.max_ma_e, agg.ma_e);
    summary.epochs_completed = epoch;
    if (runaway_ma_e(epoch_ma_e_history)) summary.diverged = true;
  }

  summary.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return summary;
}

double evaluate(codec::CodecModel& model, estimators::EstimatorKind kind, const estimators::QuantizerSpec& quantizer,
                const datagen::DataSpec& data, int n_frames) {
  if (n_frames < 1) throw std::invalid_argument("evaluate: n_frames must be >= 1");
  datagen::DataSpec spec = data;
  spec.n = n_frames;
  numerics::Prng rotation_prng(data.seed, numerics::Stream::kRotation);
  numerics::Prng eval_prng(data.seed, numerics::Stream::kEval);
  const numerics::RotationMatrix q = numerics::qr_rotation(rotation_prng, spec.p);
  const datagen::DataBatch batch = datagen::make_batch(spec, q, eval_prng);

  autodiff::Graph g;
  autodiff::Tensor e = codec::encode(g, model, g.constant(batch.y));
  Mat d_in = estimators::inference_bridge(e.value(), kind, quantizer);
  autodiff::Tensor x_hat = codec::decode(g, model, g.constant(std::move(d_in)));
  return g.mse(x_hat, g.constant(batch.x_q)).value()[0];
}

}  // namespace quantlab::trainer
