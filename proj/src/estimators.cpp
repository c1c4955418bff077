#include "quantlab/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "quantlab/datagen.hpp"
#include "quantlab/numerics.hpp"

namespace quantlab::estimators {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kNone: return "none";
    case EstimatorKind::kSte: return "ste";
    case EstimatorKind::kMste: return "mste";
    case EstimatorKind::kNa: return "na";
    case EstimatorKind::kNaDet: return "na_det";
  }
  throw std::logic_error("to_string: bad estimator kind");
}

EstimatorKind estimator_from_string(const std::string& name) {
  if (name == "none") return EstimatorKind::kNone;
  if (name == "ste") return EstimatorKind::kSte;
  if (name == "mste") return EstimatorKind::kMste;
  if (name == "na") return EstimatorKind::kNa;
  if (name == "na_det") return EstimatorKind::kNaDet;
  throw std::invalid_argument("unknown estimator '" + name + "' (expected none|ste|mste|na|na_det)");
}

int QuantizerSpec::bits_per_value() const { return datagen::bits_per_value(levels); }

QuantizerSpec QuantizerSpec::for_bits(int bits) {
  QuantizerSpec spec;
  if (bits == 2) return spec;  // default 4-level grid
  if (bits == 4) {
    spec.levels.clear();
    for (int i = 0; i < 16; ++i) spec.levels.push_back(-3.75 + 0.5 * i);
    return spec;
  }
  throw std::invalid_argument("quantizer bits must be 2 or 4, got " + std::to_string(bits));
}

namespace {

// Quantized copy of e's values as an untracked graph node, built in a
// pool-backed buffer.
Tensor quantized_constant(Tensor e, const QuantizerSpec& spec) {
  Graph& g = *e.graph();
  Mat q = g.acquire(e.rows(), e.cols());
  datagen::scalar_quantize_into(e.value(), spec.levels, q);
  return g.constant(std::move(q));
}

}  // namespace

Tensor bridge_none(Tensor e) { return e; }

BridgeResult bridge_ste(Tensor e, const QuantizerSpec& spec) {
  Graph& g = *e.graph();
  BridgeResult r;
  r.e_q = quantized_constant(e, spec);
  r.d_in = g.straight_through(e, r.e_q);
  return r;
}

BridgeResult bridge_mste(Tensor e, const QuantizerSpec& spec) {
  if (e.value().size() < 2) throw std::invalid_argument("mste bridge: needs >= 2 elements");
  Graph& g = *e.graph();
  BridgeResult r;
  r.e_q = quantized_constant(e, spec);

  // q_e = e_q - e stays attached to the graph through the -e term, which is
  // the only differentiable path into std(q_e).
  Tensor q_e = g.sub(r.e_q, e);
  Tensor sigma = g.std_all(q_e);
  // Exactly 1 in the forward pass (x/x with x > 0), 1/sg[sigma] in backward.
  Tensor modifier = g.div(sigma, g.stop_grad(sigma));
  // sg[q_e] * (modifier - 1): exactly zero forward, carries the sigma
  // sensitivity backward.
  Tensor correction = g.mul(g.stop_grad(q_e), g.sub(modifier, g.scalar(1.0)));

  r.d_in = g.add(g.straight_through(e, r.e_q), correction);
  return r;
}

Tensor bridge_na(Tensor e, double ratio_db, Prng& prng, bool detach) {
  Graph& g = *e.graph();
  const double alpha = std::pow(10.0, -ratio_db / 20.0);
  Mat scaled_noise = g.acquire(e.rows(), e.cols());
  numerics::gaussian_fill(prng, scaled_noise);
  for (int i = 0; i < scaled_noise.size(); ++i) scaled_noise[i] *= alpha;
  Tensor u = g.mul(g.constant(std::move(scaled_noise)), g.std_all(e));
  return g.add(e, detach ? g.stop_grad(u) : u);
}

Tensor commitment_loss(Tensor e, const Mat& e_q) {
  Graph& g = *e.graph();
  if (!e_q.same_shape(e.value())) throw std::invalid_argument("commitment_loss: shape mismatch");
  return g.mse(e, g.constant_like(e_q));
}

Tensor commitment_loss(Tensor e, Tensor e_q) {
  Graph& g = *e.graph();
  if (e_q.graph() != &g) throw std::invalid_argument("commitment_loss: e_q from a different graph");
  if (e_q.tracked()) throw std::invalid_argument("commitment_loss: e_q must be untracked");
  if (!e_q.value().same_shape(e.value())) throw std::invalid_argument("commitment_loss: shape mismatch");
  return g.mse(e, e_q);
}

Mat inference_bridge(const Mat& e, EstimatorKind kind, const QuantizerSpec& spec) {
  if (kind == EstimatorKind::kNone) return e;
  return datagen::scalar_quantize(e, spec.levels);
}

BridgeResult apply_bridge(Tensor e, const EstimatorConfig& cfg, const QuantizerSpec& spec, Prng& prng) {
  switch (cfg.kind) {
    case EstimatorKind::kNone: {
      BridgeResult r;
      r.d_in = bridge_none(e);
      return r;
    }
    case EstimatorKind::kSte:
      return bridge_ste(e, spec);
    case EstimatorKind::kMste:
      return bridge_mste(e, spec);
    case EstimatorKind::kNa:
    case EstimatorKind::kNaDet: {
      BridgeResult r;
      r.d_in = bridge_na(e, cfg.na_ratio_db, prng, cfg.kind == EstimatorKind::kNaDet);
      r.e_q = quantized_constant(e, spec);
      return r;
    }
  }
  throw std::logic_error("apply_bridge: bad estimator kind");
}

}  // namespace quantlab::estimators
