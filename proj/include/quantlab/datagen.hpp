#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quantlab/mat.hpp"
#include "quantlab/numerics.hpp"
#include "quantlab/prng.hpp"

namespace quantlab::datagen {

using numerics::Mat;
using numerics::Prng;
using numerics::RotationMatrix;

// Simulation-pipeline parameters: X ~ N(0,1) of shape p x n is quantized to
// the level grid, then rotated to produce the network input.
struct DataSpec {
  int p = 30;
  int n = 2000;
  std::vector<double> levels = {-1.5, -0.5, 0.5, 1.5};
  std::uint64_t seed = 1;
  bool resample_x = true;  // fresh X every update (unlimited-data regime)
  bool resample_q = false; // fresh rotation every update (off: one Q per run)
};

struct DataBatch {
  Mat y;    // p x n network input, y = q * x_q
  Mat x_q;  // p x n reconstruction target, entries on the level grid
  int bits_per_frame = 0;
};

// Throws std::invalid_argument unless levels are strictly increasing, the
// level count is a power of two, and p, n >= 1.
void validate(const DataSpec& spec);

// Nearest level; exact midpoints round to the higher level.
double scalar_quantize(double x, const std::vector<double>& levels);
Mat scalar_quantize(const Mat& x, const std::vector<double>& levels);
// Writes into out, reusing its storage; out may alias x for in-place use.
void scalar_quantize_into(const Mat& x, const std::vector<double>& levels, Mat& out);

int bits_per_value(const std::vector<double>& levels);  // log2(|levels|)
int bits_per_frame(const DataSpec& spec);               // p * bits_per_value

DataBatch make_batch(const DataSpec& spec, const RotationMatrix& q, Prng& prng);
// Same pipeline writing into an existing batch, reusing its buffers so the
// training loop generates fresh data without allocating.
void fill_batch(const DataSpec& spec, const RotationMatrix& q, Prng& prng, DataBatch& out);

// Flat binary batch exchange format: "QLAB", version u32, p u32, n u32
// (little-endian), then x_q and y as little-endian 64-bit floats row-major.
void dump_batch(const DataBatch& batch, const std::string& path);
DataBatch load_batch(const std::string& path);  // bits_per_frame is not stored; loaded as 0

}  // namespace quantlab::datagen
