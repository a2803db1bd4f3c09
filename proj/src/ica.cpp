#include "deog/ica.hpp"

#include <cmath>
#include <stdexcept>

#include "deog/numerics.hpp"

namespace deog {

WhitenResult center_whiten(const RealMatrix& x) {
  if (x.cols < 2) throw std::runtime_error("center_whiten: insufficient samples");
  const std::size_t n = x.rows;
  const std::size_t t = x.cols;

  WhitenResult out;
  out.transform.mean.resize(n);
  RealMatrix centered(n, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row_ptr(i);
    double m = 0.0;
    for (std::size_t j = 0; j < t; ++j) m += row[j];
    m /= static_cast<double>(t);
    out.transform.mean[i] = m;
    double* crow = centered.row_ptr(i);
    for (std::size_t j = 0; j < t; ++j) crow[j] = row[j] - m;
  }

  const RealMatrix cov = covariance(x);
  EigenDecomposition eig = sym_eig(cov);
  const double dmax = eig.values.empty() ? 0.0 : eig.values.front();
  for (double v : eig.values) {
    if (!(v > 1e-10 * dmax))
      throw std::runtime_error(
          "center_whiten: singular covariance (zero-variance or duplicate channel)");
  }

  // P = D^{-1/2} V^T
  RealMatrix p(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double inv_sqrt = 1.0 / std::sqrt(eig.values[i]);
    for (std::size_t j = 0; j < n; ++j) p(i, j) = inv_sqrt * eig.vectors(j, i);
  }

  out.transform.p = p;
  out.transform.v = std::move(eig.vectors);
  out.transform.d = std::move(eig.values);
  out.x = matmul(p, centered);
  return out;
}

RealMatrix unwhiten(const WhiteningTransform& t, const RealMatrix& x_white) {
  const std::size_t n = t.v.rows;
  if (x_white.rows != n) throw std::runtime_error("unwhiten: dimension error");
  // P^{-1} = V D^{1/2}
  RealMatrix p_inv(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p_inv(i, j) = t.v(i, j) * std::sqrt(t.d[j]);
  RealMatrix out = matmul(p_inv, x_white);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.row_ptr(i);
    for (std::size_t j = 0; j < out.cols; ++j) row[j] += t.mean[i];
  }
  return out;
}

ContrastValue contrast(double u) {
  const double e = std::exp(-0.5 * u * u);
  return {u * e, (1.0 - u * u) * e};
}

IcaResult fast_ica(const RealMatrix& x_white, std::size_t n_sources, SeededRng& rng,
                   double tol, int max_iter) {
  const std::size_t n = x_white.rows;
  const std::size_t t = x_white.cols;
  if (n_sources == 0 || n_sources > n)
    throw std::runtime_error("fast_ica: bad source count");
  if (t < 2) throw std::runtime_error("fast_ica: insufficient samples");

  IcaResult out;
  out.w = randn(n, n_sources, rng);
  out.iterations.assign(n_sources, 0);
  out.converged.assign(n_sources, true);

  std::vector<double> w(n);
  std::vector<double> w_new(n);
  std::vector<double> proj(t);

  auto deflate_normalize = [&](std::vector<double>& vec, std::size_t i) {
    // Remove the span of the previously extracted components.
    for (std::size_t k = 0; k < i; ++k) {
      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) dot += vec[r] * out.w(r, k);
      for (std::size_t r = 0; r < n; ++r) vec[r] -= dot * out.w(r, k);
    }
    double norm = 0.0;
    for (double v : vec) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      // Collapsed into the span of earlier components; restart randomly.
      for (double& v : vec) v = rng.normal();
      return false;
    }
    for (double& v : vec) v /= norm;
    return true;
  };

  for (std::size_t i = 0; i < n_sources; ++i) {
    for (std::size_t r = 0; r < n; ++r) w[r] = out.w(r, i);
    while (!deflate_normalize(w, i)) {
    }

    int iter = 0;
    bool converged = false;
    while (iter < max_iter) {
      ++iter;
      // proj = w^T x
      for (std::size_t j = 0; j < t; ++j) proj[j] = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double wr = w[r];
        const double* row = x_white.row_ptr(r);
        for (std::size_t j = 0; j < t; ++j) proj[j] += wr * row[j];
      }

      // w_new = E{x g(w^T x)} - E{g'(w^T x)} w
      double gp_mean = 0.0;
      for (std::size_t j = 0; j < t; ++j) {
        const ContrastValue cv = contrast(proj[j]);
        proj[j] = cv.g;  // reuse the buffer for g values
        gp_mean += cv.gprime;
      }
      gp_mean /= static_cast<double>(t);

      for (std::size_t r = 0; r < n; ++r) {
        const double* row = x_white.row_ptr(r);
        double s = 0.0;
        for (std::size_t j = 0; j < t; ++j) s += row[j] * proj[j];
        w_new[r] = s / static_cast<double>(t) - gp_mean * w[r];
      }

      if (!deflate_normalize(w_new, i)) continue;

      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) dot += w_new[r] * w[r];
      w = w_new;
      if (std::fabs(dot) > 1.0 - tol) {
        converged = true;
        break;
      }
    }

    out.iterations[i] = iter;
    out.converged[i] = converged;
    for (std::size_t r = 0; r < n; ++r) out.w(r, i) = w[r];
  }

  out.s = matmul(transpose(out.w), x_white);
  return out;
}

}  // namespace deog
