#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "quantlab/codec_model.hpp"
#include "quantlab/datagen.hpp"
#include "quantlab/prng.hpp"
#include "support/oracles.hpp"

using quantlab::autodiff::Graph;
using quantlab::autodiff::Param;
using quantlab::autodiff::Tensor;
using quantlab::codec::CodecModel;
using quantlab::codec::LayerParams;
using quantlab::numerics::Mat;
using quantlab::numerics::Prng;

namespace {

Mat rand_mat(Prng& prng, int rows, int cols, double lo = -2.0, double hi = 2.0) {
  Mat m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m[i] = lo + (hi - lo) * prng.next_double();
  return m;
}

bool bits_equal(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

// Plain-matrix re-implementation of one layer, mirroring the documented
// architecture: out = act(W*h + b), plus the input on skip layers.
Mat ref_layer(const LayerParams& layer, const Mat& h) {
  Mat z = quantlab::numerics::matmul_plain(layer.weight.value, h);
  for (int r = 0; r < z.rows(); ++r)
    for (int c = 0; c < z.cols(); ++c) z(r, c) = z(r, c) + layer.bias.value[r];
  if (layer.prelu_slope) {
    const double s = layer.prelu_slope->value[0];
    for (int i = 0; i < z.size(); ++i) z[i] = z[i] >= 0.0 ? z[i] : s * z[i];
  }
  if (layer.skip) {
    for (int i = 0; i < z.size(); ++i) z[i] = z[i] + h[i];
  }
  return z;
}

Mat ref_encode(CodecModel& model, const Mat& y) {
  Mat h = y;
  for (auto& layer : model.encoder) h = ref_layer(layer, h);
  return h;
}

Mat ref_decode(CodecModel& model, const Mat& d) {
  Mat h = d;
  for (auto& layer : model.decoder) h = ref_layer(layer, h);
  return h;
}

constexpr double kFdTol = 1e-4;

}  // namespace

TEST_CASE("parameter budget matches the architecture") {
  CodecModel m30 = quantlab::codec::init_params(1);
  // 6 layers of 30x30 weights and 30x1 biases, plus 4 scalar activation slopes.
  CHECK_EQ(quantlab::codec::parameter_count(m30), 5584);

  CodecModel m4 = quantlab::codec::init_params(1, 4);
  CHECK_EQ(quantlab::codec::parameter_count(m4), 6 * 16 + 6 * 4 + 4);
  CHECK_EQ(quantlab::codec::parameters(m4).size(), 16u);
}

TEST_CASE("initialization is deterministic per seed and respects the documented ranges") {
  CodecModel a = quantlab::codec::init_params(7);
  CodecModel b = quantlab::codec::init_params(7);
  CodecModel c = quantlab::codec::init_params(8);

  const auto pa = quantlab::codec::parameters(a);
  const auto pb = quantlab::codec::parameters(b);
  const auto pc = quantlab::codec::parameters(c);
  REQUIRE_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(bits_equal(pa[i]->value, pb[i]->value));
    if (!bits_equal(pa[i]->value, pc[i]->value)) any_diff = true;
  }
  CHECK(any_diff);

  const double bound = std::sqrt(1.0 / 30.0);
  double max_w = 0.0;
  auto check_layer = [&](const LayerParams& layer, bool expect_slope, bool expect_skip) {
    CHECK_EQ(layer.weight.value.rows(), 30);
    CHECK_EQ(layer.weight.value.cols(), 30);
    CHECK_EQ(layer.bias.value.rows(), 30);
    CHECK_EQ(layer.bias.value.cols(), 1);
    for (int i = 0; i < layer.weight.value.size(); ++i) {
      CHECK(std::fabs(layer.weight.value[i]) <= bound);
      max_w = std::max(max_w, std::fabs(layer.weight.value[i]));
    }
    for (int i = 0; i < 30; ++i) CHECK_EQ(layer.bias.value[i], 0.0);
    CHECK_EQ(layer.prelu_slope.has_value(), expect_slope);
    if (layer.prelu_slope) CHECK_EQ(layer.prelu_slope->value[0], 0.25);
    CHECK_EQ(layer.skip, expect_skip);
  };
  check_layer(a.encoder[0], true, true);
  check_layer(a.encoder[1], true, true);
  check_layer(a.encoder[2], false, false);  // linear bottleneck output
  check_layer(a.decoder[0], true, false);
  check_layer(a.decoder[1], true, true);
  check_layer(a.decoder[2], false, false);  // linear reconstruction output
  CHECK(max_w > 0.5 * bound);  // draws actually span the range
}

TEST_CASE("encoder and decoder match a from-scratch forward pass") {
  CodecModel model = quantlab::codec::init_params(5);
  Prng prng(5, 0);
  const Mat y = rand_mat(prng, 30, 17);

  Graph g;
  Tensor e = quantlab::codec::encode(g, model, g.constant_like(y));
  Tensor xh = quantlab::codec::decode(g, model, e);
  CHECK(bits_equal(e.value(), ref_encode(model, y)));
  CHECK(bits_equal(xh.value(), ref_decode(model, ref_encode(model, y))));
  for (int i = 0; i < xh.value().size(); ++i) CHECK(std::isfinite(xh.value()[i]));
}

TEST_CASE("zero input maps to zero output at initialization") {
  // Biases start at zero, so every layer maps 0 to 0 regardless of skips.
  CodecModel model = quantlab::codec::init_params(3);
  Graph g;
  Tensor e = quantlab::codec::encode(g, model, g.constant(Mat(30, 4)));
  Tensor xh = quantlab::codec::decode(g, model, e);
  for (int i = 0; i < e.value().size(); ++i) CHECK_EQ(e.value()[i], 0.0);
  for (int i = 0; i < xh.value().size(); ++i) CHECK_EQ(xh.value()[i], 0.0);
}

TEST_CASE("skip connections add the layer input verbatim") {
  CodecModel model = quantlab::codec::init_params(2);
  // Zero all weights and biases: skip layers become the identity, non-skip
  // layers collapse to zero.
  for (Param* p : quantlab::codec::parameters(model)) {
    if (p->value.size() > 1) p->value.reuse_zero(p->value.rows(), p->value.cols());
  }
  Prng prng(2, 0);
  const Mat y = rand_mat(prng, 30, 3);

  Graph g;
  Tensor e = quantlab::codec::encode(g, model, g.constant_like(y));
  // encoder: skip, skip, plain-zero layer -> zero embedding
  for (int i = 0; i < e.value().size(); ++i) CHECK_EQ(e.value()[i], 0.0);

  Graph g2;
  Tensor h = quantlab::codec::decode(g2, model, g2.constant_like(y));
  // decoder: plain-zero, skip(0 + 0), plain-zero -> zero; instead check the
  // middle skip layer alone by feeding through a one-layer reference.
  for (int i = 0; i < h.value().size(); ++i) CHECK_EQ(h.value()[i], 0.0);
  const Mat mid = ref_layer(model.decoder[1], y);
  CHECK(bits_equal(mid, y));
}

TEST_CASE("shape mismatches are rejected") {
  CodecModel model = quantlab::codec::init_params(1);
  Graph g;
  CHECK_THROWS_AS(quantlab::codec::encode(g, model, g.constant(Mat(29, 5))), std::invalid_argument);
  CHECK_THROWS_AS(quantlab::codec::decode(g, model, g.constant(Mat(31, 5))), std::invalid_argument);
}

TEST_CASE("every trainable parameter receives a finite-difference-validated gradient") {
  CodecModel model = quantlab::codec::init_params(3, 4);
  Prng prng(3, 0);
  const Mat y0 = rand_mat(prng, 4, 3, -1.0, 1.0);
  const Mat t = rand_mat(prng, 4, 3, -1.0, 1.0);

  const auto params = quantlab::codec::parameters(model);
  std::vector<Mat> vals;
  vals.reserve(params.size());
  for (Param* p : params) vals.push_back(p->value);

  quantlab::codec::zero_grads(model);
  Graph g;
  Tensor e = quantlab::codec::encode(g, model, g.constant_like(y0));
  Tensor xh = quantlab::codec::decode(g, model, e);
  g.backward(g.mse(xh, g.constant_like(t)));
  std::vector<Mat> grads;
  grads.reserve(params.size());
  for (Param* p : params) grads.push_back(p->grad);

  // Activation slopes must participate in training, not just the weights.
  bool slope_grad_nonzero = false;
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.size() == 1 && grads[i][0] != 0.0) slope_grad_nonzero = true;
  }
  CHECK(slope_grad_nonzero);

  oracles::ScalarFn f = [&](const std::vector<Mat>& xs) {
    CodecModel probe = quantlab::codec::init_params(3, 4);
    const auto ps = quantlab::codec::parameters(probe);
    for (size_t i = 0; i < ps.size(); ++i) ps[i]->value = xs[i];
    Graph gg;
    Tensor ee = quantlab::codec::encode(gg, probe, gg.constant_like(y0));
    Tensor rr = quantlab::codec::decode(gg, probe, ee);
    return gg.mse(rr, gg.constant_like(t)).value()[0];
  };
  CHECK(oracles::max_fd_rel_err(f, vals, grads) < kFdTol);
}

TEST_CASE("end-to-end gradient through the quantizer pass-through matches finite differences") {
  // The quantized values are frozen at the base point; the pass-through then
  // behaves as e + const, which the surrogate reproduces explicitly.
  CodecModel model = quantlab::codec::init_params(9, 4);
  Prng prng(9, 0);
  const Mat y0 = rand_mat(prng, 4, 3, -1.5, 1.5);
  const Mat t = rand_mat(prng, 4, 3, -1.5, 1.5);
  const std::vector<double> levels = {-1.5, -0.5, 0.5, 1.5};

  const auto params = quantlab::codec::parameters(model);
  std::vector<Mat> vals;
  for (Param* p : params) vals.push_back(p->value);

  quantlab::codec::zero_grads(model);
  Graph g;
  Tensor e = quantlab::codec::encode(g, model, g.constant_like(y0));
  Mat eq0(e.value().rows(), e.value().cols());
  quantlab::datagen::scalar_quantize_into(e.value(), levels, eq0);
  Tensor d = g.straight_through(e, eq0);
  Tensor xh = quantlab::codec::decode(g, model, d);
  g.backward(g.mse(xh, g.constant_like(t)));
  std::vector<Mat> grads;
  for (Param* p : params) grads.push_back(p->grad);
  const Mat e0 = e.value();

  oracles::ScalarFn f = [&](const std::vector<Mat>& xs) {
    CodecModel probe = quantlab::codec::init_params(9, 4);
    const auto ps = quantlab::codec::parameters(probe);
    for (size_t i = 0; i < ps.size(); ++i) ps[i]->value = xs[i];
    Graph gg;
    Tensor ee = quantlab::codec::encode(gg, probe, gg.constant_like(y0));
    Tensor dd = gg.add(gg.sub(ee, gg.constant_like(e0)), gg.constant_like(eq0));
    Tensor rr = quantlab::codec::decode(gg, probe, dd);
    return gg.mse(rr, gg.constant_like(t)).value()[0];
  };
  CHECK(oracles::max_fd_rel_err(f, vals, grads) < kFdTol);
}

TEST_CASE("gradients accumulate until cleared") {
  CodecModel model = quantlab::codec::init_params(4, 4);
  Prng prng(4, 0);
  const Mat y0 = rand_mat(prng, 4, 2);

  quantlab::codec::zero_grads(model);
  auto run_once = [&]() {
    Graph g;
    Tensor e = quantlab::codec::encode(g, model, g.constant_like(y0));
    Tensor xh = quantlab::codec::decode(g, model, e);
    g.backward(g.mse(xh, g.constant(Mat(4, 2))));
  };
  run_once();
  const Mat once = model.encoder[0].weight.grad;
  run_once();
  Mat twice = once;
  for (int i = 0; i < twice.size(); ++i) twice[i] = once[i] + once[i];
  CHECK(quantlab::numerics::max_abs_diff(model.encoder[0].weight.grad, twice) < 1e-15);

  quantlab::codec::zero_grads(model);
  for (int i = 0; i < once.size(); ++i) CHECK_EQ(model.encoder[0].weight.grad[i], 0.0);
}

TEST_CASE("checkpoints round-trip bit-for-bit and reject mismatched files") {
  const std::string path = "/tmp/codec_roundtrip.ckpt";
  CodecModel model = quantlab::codec::init_params(21);
  quantlab::codec::save_checkpoint(model, path);

  CodecModel other = quantlab::codec::init_params(22);
  quantlab::codec::load_checkpoint(other, path);
  const auto pa = quantlab::codec::parameters(model);
  const auto pb = quantlab::codec::parameters(other);
  REQUIRE_EQ(pa.size(), pb.size());
  for (size_t i = 0; i < pa.size(); ++i) CHECK(bits_equal(pa[i]->value, pb[i]->value));

  CodecModel narrow = quantlab::codec::init_params(1, 4);
  CHECK_THROWS_AS(quantlab::codec::load_checkpoint(narrow, path), std::runtime_error);
  CHECK_THROWS_AS(quantlab::codec::load_checkpoint(model, "/tmp/missing_codec.ckpt"), std::runtime_error);

  {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    std::fputs("JUNKJUNKJUNK", fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(quantlab::codec::load_checkpoint(model, path), std::runtime_error);
  std::remove(path.c_str());
}
