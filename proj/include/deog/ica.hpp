#pragma once

#include <cstddef>
#include <vector>

#include "deog/matrix.hpp"
#include "deog/rng.hpp"

namespace deog {

// Whitening map x_white = P (x - mean) with P = D^{-1/2} V^T from the
// eigendecomposition V D V^T of the channel covariance.
struct WhiteningTransform {
  RealMatrix p;              // n x n
  std::vector<double> mean;  // per-channel mean removed before projection
  RealMatrix v;              // eigenvectors, columns
  std::vector<double> d;     // eigenvalues, descending, all > 0
};

struct WhitenResult {
  RealMatrix x;  // whitened observation, identity covariance
  WhiteningTransform transform;
};

// Centers and whitens the rows of x. Fails on a near-singular covariance
// (any eigenvalue below 1e-10 of the largest), which happens with
// zero-variance or duplicated channels.
WhitenResult center_whiten(const RealMatrix& x);

// Inverse of the whitening map: V D^{1/2} x_white + mean.
RealMatrix unwhiten(const WhiteningTransform& t, const RealMatrix& x_white);

struct ContrastValue {
  double g;       // u * exp(-u^2/2)
  double gprime;  // (1 - u^2) * exp(-u^2/2)
};

// Gaussian-family nonlinearity used by the fixed-point updates.
ContrastValue contrast(double u);

struct IcaResult {
  RealMatrix w;                 // n x n_sources unmixing, orthonormal columns
  RealMatrix s;                 // n_sources x T sources, s = w^T x
  std::vector<int> iterations;  // fixed-point iterations per component
  std::vector<bool> converged;  // false when a component hit max_iter
};

// Deflation FastICA on whitened data. Each component runs the update
// w <- E{x g(w^T x)} - E{g'(w^T x)} w, is Gram-Schmidt-deflated against
// the components found so far and renormalized, until the direction
// stabilizes (|<w_new, w_old>| > 1 - tol) or max_iter passes. Components
// that never stabilize are kept and flagged.
IcaResult fast_ica(const RealMatrix& x_white, std::size_t n_sources, SeededRng& rng,
                   double tol = 1e-6, int max_iter = 200);

}  // namespace deog
