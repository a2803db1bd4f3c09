#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace deog {

// Dense row-major matrix of doubles. Throughout the library rows index
// channels/components and columns index time samples.
struct RealMatrix {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<double> data;  // rows * cols values, row-major

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row_ptr(std::size_t i) { return data.data() + i * cols; }
  const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

RealMatrix identity(std::size_t n);
RealMatrix transpose(const RealMatrix& m);
RealMatrix matmul(const RealMatrix& a, const RealMatrix& b);

// Largest |a - b| over all entries; shapes must match.
double max_abs_diff(const RealMatrix& a, const RealMatrix& b);
double max_abs(const RealMatrix& m);

// Gauss-Jordan inverse with partial pivoting. Throws on singular input.
RealMatrix invert_square(const RealMatrix& m);

// True when every entry is finite.
bool all_finite(const RealMatrix& m);

}  // namespace deog
