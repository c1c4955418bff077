#pragma once

#include <initializer_list>
#include <vector>

namespace quantlab::numerics {

// Dense row-major matrix of doubles. The one value type shared by the plain
// linear algebra helpers and the autodiff graph.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols);  // zero-filled
  Mat(int rows, int cols, std::vector<double> data);

  static Mat filled(int rows, int cols, double value);
  static Mat scalar(double value) { return filled(1, 1, value); }
  static Mat identity(int n);
  // Test/readability helper: Mat::of({{1, 2}, {3, 4}}).
  static Mat of(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }
  bool empty() const { return size() == 0; }
  size_t capacity() const { return v_.capacity(); }

  double& operator()(int r, int c) { return v_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return v_[static_cast<size_t>(r) * cols_ + c]; }
  double& operator[](int i) { return v_[i]; }
  double operator[](int i) const { return v_[i]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  // Reshape reusing capacity; contents unspecified afterwards.
  void reuse_shape(int rows, int cols);
  // Reshape reusing capacity; contents zeroed.
  void reuse_zero(int rows, int cols);

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

// C = a * b. Shared kernel: the autodiff matmul calls this exact routine so
// forward values are bit-identical between the two paths.
Mat matmul_plain(const Mat& a, const Mat& b);
// In-place variant writing into out (reuses out's storage).
void matmul_plain_into(const Mat& a, const Mat& b, Mat& out);

Mat transpose(const Mat& m);

double max_abs_diff(const Mat& a, const Mat& b);

}  // namespace quantlab::numerics
