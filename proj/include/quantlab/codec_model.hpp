#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quantlab/autodiff.hpp"

namespace quantlab::codec {

using autodiff::Graph;
using autodiff::Param;
using autodiff::Tensor;
using numerics::Mat;

// One fully connected layer: out = act(W*h + b), plus the input when skip is
// set. prelu_slope is absent on linear layers.
struct LayerParams {
  Param weight;  // width x width
  Param bias;    // width x 1
  std::optional<Param> prelu_slope;
  bool skip = false;
};

// 3 encoder + 3 decoder layers of equal width. Skips everywhere except the
// last encoder layer and the first and last decoder layer; PReLU everywhere
// except the encoder output and the decoder output, which stay linear.
struct CodecModel {
  int width = 30;
  std::uint64_t init_seed = 0;
  std::array<LayerParams, 3> encoder;
  std::array<LayerParams, 3> decoder;
};

// Weights ~ Uniform(-sqrt(1/width), sqrt(1/width)), biases zero, PReLU
// slopes 0.25. Deterministic per seed.
CodecModel init_params(std::uint64_t seed, int width = 30);

Tensor encode(Graph& g, CodecModel& model, Tensor y);
Tensor decode(Graph& g, CodecModel& model, Tensor d_in);

// Fixed traversal order (encoder 1..3 then decoder 1..3; weight, bias,
// slope-if-present within a layer). The same order rules init draws and the
// checkpoint layout.
std::vector<Param*> parameters(CodecModel& model);
int parameter_count(const CodecModel& model);
void zero_grads(CodecModel& model);

// Checkpoints: "QCKP", version u32, then every parameter in traversal order
// as little-endian 64-bit floats. Loading requires a model of matching
// architecture.
void save_checkpoint(const CodecModel& model, const std::string& path);
void load_checkpoint(CodecModel& model, const std::string& path);

}  // namespace quantlab::codec
