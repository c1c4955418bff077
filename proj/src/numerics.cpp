#include "quantlab/numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace quantlab::numerics {

Mat gaussian_matrix(Prng& prng, int rows, int cols) {
  Mat m(rows, cols);
  gaussian_fill(prng, m);
  return m;
}

void gaussian_fill(Prng& prng, Mat& m) {
  for (int i = 0; i < m.size(); ++i) m[i] = prng.next_gaussian();
}

RotationMatrix qr_rotation(Prng& prng, int p) {
  if (p <= 0) throw std::invalid_argument("qr_rotation: p must be positive");
  Mat a = gaussian_matrix(prng, p, p);

  // Householder QR: A = Q R, accumulating Q explicitly.
  Mat q = Mat::identity(p);
  std::vector<double> v(p);
  for (int k = 0; k < p; ++k) {
    double norm = 0.0;
    for (int i = k; i < p; ++i) norm += a(i, k) * a(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;  // column already zero below the diagonal

    const double alpha = a(k, k) >= 0.0 ? -norm : norm;
    for (int i = k; i < p; ++i) v[i] = a(i, k);
    v[k] -= alpha;
    double vtv = 0.0;
    for (int i = k; i < p; ++i) vtv += v[i] * v[i];
    if (vtv == 0.0) continue;
    const double beta = 2.0 / vtv;

    // A <- (I - beta v v^T) A, columns k..p-1.
    for (int j = k; j < p; ++j) {
      double dot = 0.0;
      for (int i = k; i < p; ++i) dot += v[i] * a(i, j);
      dot *= beta;
      for (int i = k; i < p; ++i) a(i, j) -= dot * v[i];
    }
    // Q <- Q (I - beta v v^T), full rows.
    for (int i = 0; i < p; ++i) {
      double dot = 0.0;
      for (int j = k; j < p; ++j) dot += q(i, j) * v[j];
      dot *= beta;
      for (int j = k; j < p; ++j) q(i, j) -= dot * v[j];
    }
  }

  // Fold sign(diag(R)) into Q so R's diagonal is non-negative; this removes
  // the reflection ambiguity and yields a Haar-uniform rotation.
  for (int j = 0; j < p; ++j) {
    if (a(j, j) < 0.0) {
      for (int i = 0; i < p; ++i) q(i, j) = -q(i, j);
    }
  }
  return RotationMatrix{std::move(q)};
}

}  // namespace quantlab::numerics
