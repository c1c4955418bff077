#pragma once

#include "quantlab/mat.hpp"
#include "quantlab/prng.hpp"

namespace quantlab::numerics {

// rows x cols matrix of i.i.d. standard-normal draws, row-major fill order.
Mat gaussian_matrix(Prng& prng, int rows, int cols);
// Same draws written into existing storage (m keeps its shape).
void gaussian_fill(Prng& prng, Mat& m);

// Orthonormal mixing matrix applied to frames before training and inverted
// (via transpose) on the way back out.
struct RotationMatrix {
  Mat q;  // p x p, orthonormal

  Mat apply(const Mat& x) const { return matmul_plain(q, x); }
  Mat invert(const Mat& y) const { return matmul_plain(transpose(q), y); }
};

// Random rotation: QR-factorize a p x p Gaussian matrix by Householder
// reflections and fix signs so the R diagonal is non-negative, which makes
// the distribution over Q uniform (Haar) and the result deterministic for a
// given generator state.
RotationMatrix qr_rotation(Prng& prng, int p);

}  // namespace quantlab::numerics
