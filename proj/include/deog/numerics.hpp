#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "deog/matrix.hpp"
#include "deog/rng.hpp"

namespace deog {

// Row-wise covariance E{(X - mean)(X - mean)^T} with population divisor T.
// X is channels x samples, T >= 2. The result is exactly symmetric.
RealMatrix covariance(const RealMatrix& x);

struct EigenDecomposition {
  RealMatrix vectors;          // columns are eigenvectors, orthonormal
  std::vector<double> values;  // sorted descending, matching columns
};

// Cyclic Jacobi eigendecomposition for symmetric matrices. Input must be
// symmetric within 1e-9 (relative to its magnitude). Sweeps until the
// largest off-diagonal entry falls below 1e-12 of the matrix scale.
EigenDecomposition sym_eig(const RealMatrix& c);

// Pearson correlation of two equal-length, non-constant vectors.
double corrcoef(const std::vector<double>& a, const std::vector<double>& b);
double corrcoef(const double* a, const double* b, std::size_t n);

// Matrix of i.i.d. standard normals drawn from rng in row-major order.
RealMatrix randn(std::size_t rows, std::size_t cols, SeededRng& rng);

}  // namespace deog
