#pragma once

#include <string>
#include <vector>

#include "quantlab/autodiff.hpp"
#include "quantlab/prng.hpp"

namespace quantlab::estimators {

using autodiff::Graph;
using autodiff::Tensor;
using numerics::Mat;
using numerics::Prng;

// Which strategy carries gradients across the non-differentiable quantizer.
enum class EstimatorKind { kNone, kSte, kMste, kNa, kNaDet };

std::string to_string(EstimatorKind kind);
// Accepts the CLI spellings none|ste|mste|na|na_det; throws std::invalid_argument otherwise.
EstimatorKind estimator_from_string(const std::string& name);

// Bottleneck quantizer definition.
struct QuantizerSpec {
  std::vector<double> levels = {-1.5, -0.5, 0.5, 1.5};

  int bits_per_value() const;
  // 2 bits -> the 4-level grid above; 4 bits -> 16 levels, step 0.5,
  // symmetric: {-3.75, -3.25, ..., 3.75}. Anything else is an error.
  static QuantizerSpec for_bits(int bits);
};

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::kSte;
  double cl_weight = 0.0;     // 0 disables the commitment loss
  double na_ratio_db = 4.0;   // embedding-to-noise ratio; NA kinds only
};

// d_in feeds the decoder; e_q is an untracked graph node holding the
// quantized embedding values when the bridge quantizes (an empty handle for
// the none bridge).
struct BridgeResult {
  Tensor d_in;
  Tensor e_q;

  bool has_quantized() const { return e_q.graph() != nullptr; }
};

// Identity: decoder sees the raw embedding (the quantizer-free baseline).
Tensor bridge_none(Tensor e);

// Forward: d_in == scalar_quantize(e) bit-for-bit. Backward: identity, the
// quantization error enters as detached additive noise.
BridgeResult bridge_ste(Tensor e, const QuantizerSpec& spec);

// Same forward as bridge_ste, but the noise is attached to the graph through
// the standard deviation of the quantization error: conceptually
// d_in = e + sg[q_e] * (std(q_e) / sg[std(q_e)]), so the backward pass sees
// identity plus sg[q_e / std(q_e)] * d std(q_e) / d e.
BridgeResult bridge_mste(Tensor e, const QuantizerSpec& spec);

// Additive-noise surrogate: d_in = e + u, u = alpha * std_all(e) * n01 with
// alpha = 10^(-ratio_db/20) and n01 fresh standard-normal draws (graph
// constants). detach=false keeps u attached through std_all(e); detach=true
// stops the gradient so the bridge backpropagates as the identity.
Tensor bridge_na(Tensor e, double ratio_db, Prng& prng, bool detach);

// mean((e - sg[e_q])^2); gradient reaches e only. The Tensor overload
// requires an untracked e_q (as produced by the bridges).
Tensor commitment_loss(Tensor e, const Mat& e_q);
Tensor commitment_loss(Tensor e, Tensor e_q);

// Inference path: hard quantizer for every kind except kNone (identity).
Mat inference_bridge(const Mat& e, EstimatorKind kind, const QuantizerSpec& spec);

// Dispatch on cfg.kind. e_q is filled for every kind except kNone so the
// commitment loss and logging can reuse it; prng is only touched by NA kinds.
BridgeResult apply_bridge(Tensor e, const EstimatorConfig& cfg, const QuantizerSpec& spec, Prng& prng);

}  // namespace quantlab::estimators
