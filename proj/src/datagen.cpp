#include "quantlab/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace quantlab::datagen {

namespace {

void check_levels(const std::vector<double>& levels) {
  if (levels.empty()) throw std::invalid_argument("quantizer levels must be non-empty");
  for (size_t i = 1; i < levels.size(); ++i) {
    if (!(levels[i] > levels[i - 1]))
      throw std::invalid_argument("quantizer levels must be strictly increasing");
  }
}

std::vector<double> midpoints(const std::vector<double>& levels) {
  std::vector<double> mids(levels.size() - 1);
  for (size_t i = 0; i + 1 < levels.size(); ++i) mids[i] = 0.5 * (levels[i] + levels[i + 1]);
  return mids;
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
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

void validate(const DataSpec& spec) {
  if (spec.p < 1 || spec.n < 1) throw std::invalid_argument("data spec: p and n must be >= 1");
  check_levels(spec.levels);
  bits_per_value(spec.levels);  // power-of-two check
}

double scalar_quantize(double x, const std::vector<double>& levels) {
  check_levels(levels);
  const auto mids = midpoints(levels);
  const auto it = std::upper_bound(mids.begin(), mids.end(), x);
  return levels[static_cast<size_t>(it - mids.begin())];
}

void scalar_quantize_into(const Mat& x, const std::vector<double>& levels, Mat& out) {
  check_levels(levels);
  const auto mids = midpoints(levels);
  if (&out != &x) out.reuse_shape(x.rows(), x.cols());
  // Branchless form of upper_bound over the midpoints: count how many
  // midpoints are <= x[i] (so an exact midpoint picks the higher of its two
  // neighboring levels, matching the scalar overload bit for bit).
  const double* m = mids.data();
  const size_t nm = mids.size();
  for (int i = 0; i < x.size(); ++i) {
    const double v = x[i];
    size_t idx = 0;
    for (size_t k = 0; k < nm; ++k) idx += v >= m[k] ? 1u : 0u;
    out[i] = levels[idx];
  }
}

Mat scalar_quantize(const Mat& x, const std::vector<double>& levels) {
  Mat out(x.rows(), x.cols());
  scalar_quantize_into(x, levels, out);
  return out;
}

int bits_per_value(const std::vector<double>& levels) {
  const size_t k = levels.size();
  if (k == 0 || (k & (k - 1)) != 0)
    throw std::invalid_argument("level count must be a power of two, got " + std::to_string(k));
  int bits = 0;
  for (size_t v = k; v > 1; v >>= 1) ++bits;
  return bits;
}

int bits_per_frame(const DataSpec& spec) { return spec.p * bits_per_value(spec.levels); }

void fill_batch(const DataSpec& spec, const RotationMatrix& q, Prng& prng, DataBatch& out) {
  validate(spec);
  if (q.q.rows() != spec.p || q.q.cols() != spec.p)
    throw std::invalid_argument("make_batch: rotation must be " + std::to_string(spec.p) + "x" +
                                std::to_string(spec.p));
  // X is drawn straight into the target buffer and quantized in place; the
  // continuous values are not needed past this point.
  out.x_q.reuse_shape(spec.p, spec.n);
  numerics::gaussian_fill(prng, out.x_q);
  scalar_quantize_into(out.x_q, spec.levels, out.x_q);
  matmul_plain_into(q.q, out.x_q, out.y);
  out.bits_per_frame = bits_per_frame(spec);
}

DataBatch make_batch(const DataSpec& spec, const RotationMatrix& q, Prng& prng) {
  DataBatch b;
  fill_batch(spec, q, prng, b);
  return b;
}

void dump_batch(const DataBatch& batch, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("dump_batch: cannot open " + path);
  os.write("QLAB", 4);
  write_u32(os, 1u);
  write_u32(os, static_cast<std::uint32_t>(batch.x_q.rows()));
  write_u32(os, static_cast<std::uint32_t>(batch.x_q.cols()));
  write_f64_le(os, batch.x_q.data(), batch.x_q.size());
  write_f64_le(os, batch.y.data(), batch.y.size());
  if (!os) throw std::runtime_error("dump_batch: write failed for " + path);
}

DataBatch load_batch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_batch: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "QLAB") throw std::runtime_error("load_batch: bad magic in " + path);
  const std::uint32_t version = read_u32(is);
  if (version != 1u) throw std::runtime_error("load_batch: unsupported version " + std::to_string(version));
  const int p = static_cast<int>(read_u32(is));
  const int n = static_cast<int>(read_u32(is));
  if (!is || p < 1 || n < 1) throw std::runtime_error("load_batch: bad header in " + path);
  DataBatch b;
  b.x_q = Mat(p, n);
  b.y = Mat(p, n);
  read_f64_le(is, b.x_q.data(), b.x_q.size());
  read_f64_le(is, b.y.data(), b.y.size());
  if (!is) throw std::runtime_error("load_batch: truncated file " + path);
  return b;
}

}  // namespace quantlab::datagen
