#include <doctest.h>

#include <stdexcept>
#include <cmath>
#include <numbers>
#include <vector>

#include "deog/ica.hpp"
#include "deog/numerics.hpp"

using namespace deog;

namespace {

RealMatrix random_mix(const RealMatrix& sources, SeededRng& rng) {
  const RealMatrix mixing = randn(sources.rows, sources.rows, rng);
  return matmul(mixing, sources);
}

double laplacian(SeededRng& rng) {
  const double u = rng.uniform() - 0.5;
  return (u < 0.0 ? 1.0 : -1.0) * std::log(1.0 - 2.0 * std::fabs(u));
}

// Checks that the recovered components match the true sources one to one
// through the absolute correlation, permutation and sign free.
void check_assignment(const RealMatrix& sources, const RealMatrix& recovered,
                      double min_corr) {
  const std::size_t n = sources.rows;
  REQUIRE(recovered.rows == n);
  std::vector<bool> used(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    double best = 0.0;
    std::size_t best_j = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double c =
          std::fabs(corrcoef(recovered.row_ptr(i), sources.row_ptr(j), sources.cols));
      if (c > best) {
        best = c;
        best_j = j;
      }
    }
    REQUIRE(best_j < n);
    used[best_j] = true;
    CHECK(best >= min_corr);
  }
}

}  // namespace

TEST_CASE("whitening a whitened matrix stays white and orthogonal") {
  SeededRng rng(31);
  const RealMatrix x = random_mix(randn(3, 2000, rng), rng);
  const WhitenResult first = center_whiten(x);
  const WhitenResult second = center_whiten(first.x);

  const RealMatrix cov2 = covariance(second.x);
  CHECK(max_abs_diff(cov2, identity(3)) < 1e-6);
  // With identity covariance the projection is orthogonal.
  const RealMatrix ptp = matmul(transpose(second.transform.p), second.transform.p);
  CHECK(max_abs_diff(ptp, identity(3)) < 1e-6);
}

TEST_CASE("whitened covariance is the identity") {
  SeededRng rng(32);
  const RealMatrix x = random_mix(randn(3, 2000, rng), rng);
  const WhitenResult w = center_whiten(x);
  CHECK(max_abs_diff(covariance(w.x), identity(3)) < 1e-6);
}

TEST_CASE("duplicated channels make the covariance singular") {
  SeededRng rng(33);
  RealMatrix x = randn(3, 500, rng);
  for (std::size_t j = 0; j < x.cols; ++j) x(2, j) = x(0, j);
  CHECK_THROWS_WITH_AS(center_whiten(x), doctest::Contains("singular covariance"),
                       std::runtime_error);
}

TEST_CASE("unwhiten inverts the whitening map") {
  SeededRng rng(34);
  const RealMatrix x = random_mix(randn(4, 1000, rng), rng);
  const WhitenResult w = center_whiten(x);
  CHECK(max_abs_diff(unwhiten(w.transform, w.x), x) < 1e-8);
}

TEST_CASE("contrast values at reference points") {
  const ContrastValue at0 = contrast(0.0);
  CHECK(at0.g == doctest::Approx(0.0));
  CHECK(at0.gprime == doctest::Approx(1.0));

  const ContrastValue at1 = contrast(1.0);
  CHECK(at1.g == doctest::Approx(std::exp(-0.5)));
  CHECK(at1.gprime == doctest::Approx(0.0));
}

TEST_CASE("contrast matches finite differences of its antiderivative") {
  // g is the derivative of -exp(-u^2/2); g' the derivative of g.
  auto f = [](double u) { return -std::exp(-0.5 * u * u); };
  const double h = 1e-6;
  const double u = 2.0;
  const ContrastValue cv = contrast(u);
  CHECK(cv.g == doctest::Approx((f(u + h) - f(u - h)) / (2.0 * h)).epsilon(1e-6));
  const double g_plus = contrast(u + h).g;
  const double g_minus = contrast(u - h).g;
  CHECK(cv.gprime == doctest::Approx((g_plus - g_minus) / (2.0 * h)).epsilon(1e-6));
}

TEST_CASE("single component comes back unit norm") {
  SeededRng rng(35);
  const WhitenResult w = center_whiten(random_mix(randn(3, 1500, rng), rng));
  SeededRng ica_rng(36);
  const IcaResult res = fast_ica(w.x, 1, ica_rng);
  double norm = 0.0;
  for (std::size_t r = 0; r < 3; ++r) norm += res.w(r, 0) * res.w(r, 0);
  CHECK(std::fabs(std::sqrt(norm) - 1.0) < 1e-12);
}

TEST_CASE("two known sources are recovered through a random mixing") {
  const std::size_t t = 2000;
  const double fs = 200.0;
  SeededRng rng(37);
  RealMatrix sources(2, t);
  for (std::size_t j = 0; j < t; ++j) {
    sources(0, j) =
        std::sin(2.0 * std::numbers::pi * 7.0 * static_cast<double>(j) / fs);
    sources(1, j) = laplacian(rng);
  }
  const RealMatrix x = random_mix(sources, rng);
  const WhitenResult w = center_whiten(x);
  SeededRng ica_rng(38);
  const IcaResult res = fast_ica(w.x, 2, ica_rng);
  check_assignment(sources, res.s, 0.95);
}

TEST_CASE("full decomposition has orthonormal unmixing and reconstructs") {
  const std::size_t t = 3000;
  SeededRng rng(39);
  RealMatrix sources(4, t);
  for (std::size_t j = 0; j < t; ++j) {
    sources(0, j) = laplacian(rng);
    sources(1, j) = rng.uniform() < 0.05 ? 8.0 * (rng.uniform() - 0.5) : 0.0;
    const double g = rng.normal();
    sources(2, j) = g * g * g;
    sources(3, j) = laplacian(rng) * 0.5;
  }
  const WhitenResult w = center_whiten(random_mix(sources, rng));
  SeededRng ica_rng(40);
  const IcaResult res = fast_ica(w.x, 4, ica_rng);

  const RealMatrix wtw = matmul(transpose(res.w), res.w);
  CHECK(max_abs_diff(wtw, identity(4)) < 1e-6);

  // Deflation keeps the components mutually orthogonal.
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) CHECK(std::fabs(wtw(i, j)) < 1e-6);

  // With a square orthonormal W, (W^T)^{-1} = W rebuilds the input.
  const RealMatrix rebuilt = matmul(res.w, res.s);
  CHECK(max_abs_diff(rebuilt, w.x) < 1e-6);
}

TEST_CASE("fast_ica is deterministic under the seed") {
  SeededRng rng(41);
  const WhitenResult w = center_whiten(random_mix(randn(3, 1200, rng), rng));
  SeededRng r1(42), r2(42);
  const IcaResult a = fast_ica(w.x, 3, r1);
  const IcaResult b = fast_ica(w.x, 3, r2);
  CHECK(max_abs_diff(a.w, b.w) == 0.0);
  CHECK(max_abs_diff(a.s, b.s) == 0.0);
}
