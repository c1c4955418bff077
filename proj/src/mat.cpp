#include "quantlab/mat.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace quantlab::numerics {

namespace {
size_t checked_size(int rows, int cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("Mat: negative dimension");
  return static_cast<size_t>(rows) * cols;
}
}  // namespace

Mat::Mat(int rows, int cols) : rows_(rows), cols_(cols), v_(checked_size(rows, cols), 0.0) {}

Mat::Mat(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), v_(std::move(data)) {
  if (static_cast<size_t>(rows) * cols != v_.size())
    throw std::invalid_argument("Mat: data size does not match " + std::to_string(rows) + "x" + std::to_string(cols));
}

Mat Mat::filled(int rows, int cols, double value) {
  Mat m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m[i] = value;
  return m;
}

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::of(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  Mat m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw std::invalid_argument("Mat::of: ragged rows");
    int j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return m;
}

void Mat::reuse_shape(int rows, int cols) {
  rows_ = rows;
  cols_ = cols;
  v_.resize(static_cast<size_t>(rows) * cols);
}

void Mat::reuse_zero(int rows, int cols) {
  rows_ = rows;
  cols_ = cols;
  v_.assign(static_cast<size_t>(rows) * cols, 0.0);
}

void matmul_plain_into(const Mat& a, const Mat& b, Mat& out) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree (" + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + ")");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  out.reuse_shape(m, n);
  // ikj order: streams rows of b, vectorizes on the contiguous j loop.
  for (int i = 0; i < m; ++i) {
    const double* ai = a.data() + static_cast<size_t>(i) * k;
    double* ci = out.data() + static_cast<size_t>(i) * n;
    if (k == 0) {
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
      continue;
    }
    {
      const double s = ai[0];
      const double* b0 = b.data();
      for (int j = 0; j < n; ++j) ci[j] = s * b0[j];
    }
    for (int kk = 1; kk < k; ++kk) {
      const double s = ai[kk];
      const double* bk = b.data() + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += s * bk[j];
    }
  }
}

Mat matmul_plain(const Mat& a, const Mat& b) {
  Mat out;
  matmul_plain_into(a, b, out);
  return out;
}

Mat transpose(const Mat& m) {
  Mat t(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double d = 0.0;
  for (int i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

}  // namespace quantlab::numerics
