#include "deog/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace deog {

RealMatrix covariance(const RealMatrix& x) {
  if (x.cols < 2) throw std::runtime_error("covariance: insufficient samples");
  const std::size_t n = x.rows;
  const std::size_t t = x.cols;

  std::vector<double> mean(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row_ptr(i);
    double s = 0.0;
    for (std::size_t j = 0; j < t; ++j) s += row[j];
    mean[i] = s / static_cast<double>(t);
  }

  RealMatrix c(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = x.row_ptr(i);
    for (std::size_t k = i; k < n; ++k) {
      const double* rk = x.row_ptr(k);
      double s = 0.0;
      for (std::size_t j = 0; j < t; ++j) s += (ri[j] - mean[i]) * (rk[j] - mean[k]);
      const double v = s / static_cast<double>(t);
      c(i, k) = v;
      c(k, i) = v;  // mirrored, so symmetry is exact
    }
  }
  return c;
}

EigenDecomposition sym_eig(const RealMatrix& c) {
  if (c.rows != c.cols) throw std::runtime_error("sym_eig: not symmetric");
  const std::size_t n = c.rows;
  const double scale = std::max(1.0, max_abs(c));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::fabs(c(i, j) - c(j, i)) > 1e-9 * scale)
        throw std::runtime_error("sym_eig: not symmetric");

  RealMatrix a = c;
  RealMatrix v = identity(n);

  const double stop = 1e-12 * scale;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off = std::max(off, std::fabs(a(i, j)));
    if (off < stop) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) < stop * 1e-3) continue;
        const double theta = 0.5 * (a(q, q) - a(p, p)) / apq;
        double tt = 1.0 / (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
        if (theta < 0.0) tt = -tt;
        const double cs = 1.0 / std::sqrt(1.0 + tt * tt);
        const double sn = tt * cs;

        // Rotate rows/columns p and q of A.
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = cs * akp - sn * akq;
          a(k, q) = sn * akp + cs * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = cs * apk - sn * aqk;
          a(q, k) = sn * apk + cs * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = cs * vkp - sn * vkq;
          v(k, q) = sn * vkp + cs * vkq;
        }
      }
    }
  }

  // Sort eigenpairs by descending eigenvalue.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return diag[l] > diag[r]; });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = RealMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = diag[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

double corrcoef(const double* a, const double* b, std::size_t n) {
  if (n < 2) throw std::runtime_error("corrcoef: insufficient samples");
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double saa = 0.0;
  double sbb = 0.0;
  double sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw std::runtime_error("corrcoef: zero variance");
  return sab / std::sqrt(saa * sbb);
}

double corrcoef(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::runtime_error("corrcoef: length mismatch");
  return corrcoef(a.data(), b.data(), a.size());
}

RealMatrix randn(std::size_t rows, std::size_t cols, SeededRng& rng) {
  RealMatrix m(rows, cols);
  for (double& v : m.data) v = rng.normal();
  return m;
}

}  // namespace deog
