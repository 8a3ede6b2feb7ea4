#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "fearec/spectral.hpp"

using namespace fearec::spectral;

TEST_CASE("rfft of constant and impulse series") {
  const double c = 2.5;
  const std::vector<double> constant(4, c);
  const auto s = rfft(constant);
  REQUIRE(s.coeffs.size() == 3);
  CHECK(std::abs(s.coeffs[0] - Complex(4 * c, 0)) < 1e-12);
  CHECK(std::abs(s.coeffs[1]) < 1e-12);
  CHECK(std::abs(s.coeffs[2]) < 1e-12);

  const std::vector<double> impulse = {1, 0, 0, 0};
  for (const auto& v : rfft(impulse).coeffs) CHECK(std::abs(v - Complex(1, 0)) < 1e-12);
}

TEST_CASE("rfft matches a direct DFT for every length up to 64") {
  std::mt19937_64 gen(11);
  for (std::size_t n = 1; n <= 64; ++n) {
    const auto x = oracle::random_vector(n, gen);
    const auto s = rfft(x);
    const auto ref = oracle::dft(x);
    REQUIRE(s.coeffs.size() == n / 2 + 1);
    REQUIRE(s.origin_length == n);
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) CHECK(std::abs(s.coeffs[k] - ref[k]) < 1e-9);
    CHECK(s.coeffs[0].imag() == 0.0);
    if (n % 2 == 0) CHECK(s.coeffs[n / 2].imag() == 0.0);
  }
}

TEST_CASE("large prime lengths take the chirp path and stay exact") {
  std::mt19937_64 gen(5);
  for (std::size_t n : {17u, 97u, 127u, 211u, 2 * 101u}) {
    const auto x = oracle::random_vector(n, gen);
    const auto s = rfft(x);
    const auto ref = oracle::dft(x);
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) CHECK(std::abs(s.coeffs[k] - ref[k]) < 1e-8);
  }
}

TEST_CASE("irfft inverts rfft") {
  const std::vector<double> x = {3, -1, 4, 1, -5};
  const auto back = irfft(rfft(x));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-12));

  HalfSpectrum dc{{Complex(6, 0), 0, 0, 0}, 6};
  for (double v : irfft(dc)) CHECK(v == doctest::Approx(1.0));

  std::mt19937_64 gen(3);
  const auto y = oracle::random_vector(8, gen);
  const auto full = oracle::dft(y);
  const auto via_oracle = oracle::idft_real(full);
  const auto trip = irfft(rfft(y));
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(std::abs(trip[i] - y[i]) < 1e-9);
    CHECK(std::abs(via_oracle[i] - y[i]) < 1e-9);
  }
}

TEST_CASE("spectral errors") {
  CHECK_THROWS_WITH(rfft(std::vector<double>{}), "empty series");
  CHECK_THROWS_WITH(irfft(HalfSpectrum{{1, 2}, 4}), "shape mismatch");
  CHECK_THROWS_WITH(irfft(HalfSpectrum{{Complex(1, 0.5), 0, 0}, 4}), "non-symmetric spectrum");
  CHECK_THROWS_WITH(irfft(HalfSpectrum{{1, 0, Complex(0, 1)}, 4}), "non-symmetric spectrum");
  const std::vector<double> a = {1, 2}, b = {1, 2, 3};
  CHECK_THROWS(cross_correlation_fft(a, b));
  CHECK_THROWS(brute_cross_correlation(a, b));
}

TEST_CASE("brute correlation hand values") {
  const std::vector<double> ones = {1, 1, 1};
  for (double s : brute_cross_correlation(ones, ones).scores) CHECK(s == 3.0);
  const std::vector<double> q = {1, 2}, k = {3, 4};
  const auto r = brute_cross_correlation(q, k);
  CHECK(r.at_lag(1) == 10.0);
  CHECK(r.at_lag(2) == 11.0);
}

TEST_CASE("fft correlation: impulse, periodic, random") {
  const std::vector<double> impulse = {1, 0, 0, 0};
  const auto r = cross_correlation_fft(impulse, impulse);
  const std::vector<double> expect = {0, 0, 0, 1};
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(r.scores[i] - expect[i]) < 1e-12);

  const std::vector<double> p = {1, 0, 1, 0, 1, 0};
  const auto pr = cross_correlation_fft(p, p);
  const auto po = oracle::lag_sums(p, p);
  for (std::size_t even : {2u, 4u, 6u}) {
    for (std::size_t odd : {1u, 3u, 5u}) CHECK(pr.at_lag(even) > pr.at_lag(odd) + 1e-9);
  }
  for (std::size_t t = 0; t < 6; ++t) CHECK(std::abs(pr.scores[t] - po[t]) < 1e-12);

  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + gen() % 15;
    const auto a = oracle::random_vector(n, gen), b = oracle::random_vector(n, gen);
    const auto fast = cross_correlation_fft(a, b);
    const auto ref = oracle::lag_sums(a, b);
    const auto brute = brute_cross_correlation(a, b);
    for (std::size_t t = 0; t < n; ++t) {
      CHECK(std::abs(fast.scores[t] - ref[t]) < 1e-9);
      CHECK(std::abs(brute.scores[t] - ref[t]) < 1e-12);
    }
  }
}

TEST_CASE("column transforms agree with per-column transforms") {
  std::mt19937_64 gen(8);
  for (Eigen::Index cols : {1, 2, 5}) {
    const fearec::Matrix x = oracle::random_matrix(9, cols, gen);
    const auto s = rfft_columns(x);
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::vector<double> col(9);
      for (int t = 0; t < 9; ++t) col[static_cast<std::size_t>(t)] = x(t, c);
      const auto ref = oracle::dft(col);
      for (int k = 0; k < 5; ++k) CHECK(std::abs(s(k, c) - ref[static_cast<std::size_t>(k)]) < 1e-9);
    }
    CHECK((irfft_columns(s, 9) - x).cwiseAbs().maxCoeff() < 1e-9);
  }
}
