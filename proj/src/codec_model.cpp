#include "quantlab/codec_model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "quantlab/prng.hpp"

namespace quantlab::codec {

namespace {

LayerParams make_layer(numerics::Prng& prng, int width, bool activated, bool skip) {
  LayerParams layer;
  const double a = std::sqrt(1.0 / width);
  Mat w(width, width);
  for (int i = 0; i < w.size(); ++i) w[i] = (2.0 * prng.next_double() - 1.0) * a;
  layer.weight = Param(std::move(w));
  layer.bias = Param(Mat(width, 1));
  if (activated) layer.prelu_slope = Param(Mat::scalar(0.25));
  layer.skip = skip;
  return layer;
}

Tensor run_layer(Graph& g, LayerParams& layer, Tensor h, Tensor ones_row) {
  // Column-broadcast bias as an outer product with a ones row.
  Tensor z = g.add(g.matmul(g.param(layer.weight), h), g.matmul(g.param(layer.bias), ones_row));
  Tensor a = layer.prelu_slope ? g.prelu(z, g.param(*layer.prelu_slope)) : z;
  return layer.skip ? g.add(a, h) : a;
}

Tensor run_stack(Graph& g, std::array<LayerParams, 3>& stack, Tensor h, int width, const char* what) {
  if (h.rows() != width)
    throw std::invalid_argument(std::string(what) + ": input must have " + std::to_string(width) + " rows, got " +
                                std::to_string(h.rows()));
  Mat ones = g.acquire(1, h.cols());
  for (int j = 0; j < ones.size(); ++j) ones[j] = 1.0;
  Tensor ones_row = g.constant(std::move(ones));
  for (LayerParams& layer : stack) h = run_layer(g, layer, h, ones_row);
  return h;
}

void write_f64_le(std::ostream& os, const double* p, int count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count) * 8);
  } else {
    for (int i = 0; i < count; ++i) {
      std::uint64_t u;
      std::memcpy(&u, &p[i], 8);
      unsigned char b[8];
      for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(u >> (8 * k));
      os.write(reinterpret_cast<const char*>(b), 8);
    }
  }
}

void read_f64_le(std::istream& is, double* p, int count) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count) * 8);
  } else {
    for (int i = 0; i < count; ++i) {
      unsigned char b[8];
      is.read(reinterpret_cast<char*>(b), 8);
      std::uint64_t u = 0;
      for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(b[k]) << (8 * k);
      std::memcpy(&p[i], &u, 8);
    }
  }
}

}  // namespace

CodecModel init_params(std::uint64_t seed, int width) {
  if (width < 1) throw std::invalid_argument("init_params: width must be >= 1");
  CodecModel model;
  model.width = width;
  model.init_seed = seed;
  numerics::Prng prng(seed, numerics::Stream::kInit);
  // Encoder: skip, skip, plain linear output. Decoder: plain, skip, linear output.
  model.encoder[0] = make_layer(prng, width, true, true);
  model.encoder[1] = make_layer(prng, width, true, true);
  model.encoder[2] = make_layer(prng, width, false, false);
  model.decoder[0] = make_layer(prng, width, true, false);
  model.decoder[1] = make_layer(prng, width, true, true);
  model.decoder[2] = make_layer(prng, width, false, false);
  return model;
}

Tensor encode(Graph& g, CodecModel& model, Tensor y) { return run_stack(g, model.encoder, y, model.width, "encode"); }

Tensor decode(Graph& g, CodecModel& model, Tensor d_in) {
  return run_stack(g, model.decoder, d_in, model.width, "decode");
}

std::vector<Param*> parameters(CodecModel& model) {
  std::vector<Param*> out;
  for (auto* stack : {&model.encoder, &model.decoder}) {
    for (LayerParams& layer : *stack) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
      if (layer.prelu_slope) out.push_back(&*layer.prelu_slope);
    }
  }
  return out;
}

int parameter_count(const CodecModel& model) {
  int count = 0;
  for (const auto* stack : {&model.encoder, &model.decoder}) {
    for (const LayerParams& layer : *stack) {
      count += layer.weight.value.size() + layer.bias.value.size();
      if (layer.prelu_slope) count += 1;
    }
  }
  return count;
}

void zero_grads(CodecModel& model) {
  for (Param* p : parameters(model)) p->zero_grad();
}

void save_checkpoint(const CodecModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write("QCKP", 4);
  const std::uint32_t version = 1;
  unsigned char vb[4] = {static_cast<unsigned char>(version), static_cast<unsigned char>(version >> 8),
                         static_cast<unsigned char>(version >> 16), static_cast<unsigned char>(version >> 24)};
  os.write(reinterpret_cast<const char*>(vb), 4);
  for (Param* p : parameters(const_cast<CodecModel&>(model))) write_f64_le(os, p->value.data(), p->value.size());
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

void load_checkpoint(CodecModel& model, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "QCKP") throw std::runtime_error("load_checkpoint: bad magic in " + path);
  unsigned char vb[4];
  is.read(reinterpret_cast<char*>(vb), 4);
  const std::uint32_t version = static_cast<std::uint32_t>(vb[0]) | (static_cast<std::uint32_t>(vb[1]) << 8) |
                                (static_cast<std::uint32_t>(vb[2]) << 16) | (static_cast<std::uint32_t>(vb[3]) << 24);
  if (version != 1u) throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  is.seekg(0, std::ios::end);
  const auto total = static_cast<long long>(is.tellg()) - 8;
  const long long expected = 8LL * parameter_count(model);
  if (total != expected)
    throw std::runtime_error("load_checkpoint: " + path + " holds " + std::to_string(total) +
                             " parameter bytes, expected " + std::to_string(expected));
  is.seekg(8, std::ios::beg);
  for (Param* p : parameters(model)) read_f64_le(is, p->value.data(), p->value.size());
  if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
}

}  // namespace quantlab::codec
