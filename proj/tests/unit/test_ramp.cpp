#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "fearec/ramp.hpp"
#include "fearec/spectral.hpp"

using namespace fearec;
using namespace fearec::ramp;
using fearec::spectral::Complex;

namespace {
std::pair<std::size_t, std::size_t> se(const Band& b) { return {b.start, b.end}; }
}  // namespace

TEST_CASE("overlapping bands by hand") {
  const RampSchedule s(2, 26, 0.8);
  CHECK(s.mode() == SamplingMode::overlapping);
  CHECK(se(s.band_for_layer(1)) == std::pair<std::size_t, std::size_t>{5, 26});
  CHECK(se(s.band_for_layer(2)) == std::pair<std::size_t, std::size_t>{0, 21});
}

TEST_CASE("partition bands by hand") {
  const RampSchedule s(2, 26, 0.5);
  CHECK(s.mode() == SamplingMode::partition);
  CHECK(se(s.band_for_layer(1)) == std::pair<std::size_t, std::size_t>{13, 26});
  CHECK(se(s.band_for_layer(2)) == std::pair<std::size_t, std::size_t>{0, 13});
}

TEST_CASE("alpha = 1 keeps the whole spectrum") {
  for (std::size_t layers : {1u, 2u, 5u}) {
    const RampSchedule s(layers, 26, 1.0);
    for (std::size_t l = 1; l <= layers; ++l) CHECK(se(s.band_for_layer(l)) == std::pair<std::size_t, std::size_t>{0, 26});
  }
}

TEST_CASE("a single layer is always a full partition") {
  const RampSchedule s(1, 26, 0.8);
  CHECK(s.mode() == SamplingMode::partition);
  CHECK(se(s.band_for_layer(1)) == std::pair<std::size_t, std::size_t>{0, 26});
}

TEST_CASE("ramp errors") {
  CHECK_THROWS(RampSchedule(0, 5, 0.5));
  CHECK_THROWS(RampSchedule(2, 5, 0.0));
  CHECK_THROWS(RampSchedule(2, 5, 1.5));
  const RampSchedule s(2, 5, 0.8);
  CHECK_THROWS(s.band_for_layer(0));
  CHECK_THROWS(s.band_for_layer(3));
}

TEST_CASE("every band is non-empty and inside the spectrum") {
  for (std::size_t layers = 1; layers <= 6; ++layers) {
    for (std::size_t m = 1; m <= 40; ++m) {
      for (double alpha : {0.05, 0.2, 0.25, 0.5, 0.6, 0.8, 0.99, 1.0}) {
        const RampSchedule s(layers, m, alpha);
        for (std::size_t l = 1; l <= layers; ++l) {
          const Band b = s.band_for_layer(l);
          CHECK(b.start < b.end);
          CHECK(b.end <= m);
          CHECK(b.layer == l);
        }
      }
    }
  }
}

TEST_CASE("sample_band and zero_pad_band") {
  ComplexMatrix s(4, 1);
  s << 1.0, 2.0, 3.0, 4.0;
  const Band band{1, 3, 1};
  const ComplexMatrix sampled = sample_band(s, band);
  REQUIRE(sampled.rows() == 2);
  CHECK(sampled(0, 0) == Complex(2.0));
  CHECK(sampled(1, 0) == Complex(3.0));
  const ComplexMatrix padded = zero_pad_band(sampled, band, 4);
  CHECK(padded(0, 0) == Complex(0.0));
  CHECK(padded(1, 0) == Complex(2.0));
  CHECK(padded(2, 0) == Complex(3.0));
  CHECK(padded(3, 0) == Complex(0.0));
  CHECK(sample_band(padded, band) == sampled);
  CHECK(sample_band(s, Band{0, 4, 1}) == s);
  CHECK(zero_pad_band(s, Band{0, 4, 1}, 4) == s);
  CHECK_THROWS(sample_band(s, Band{2, 5, 1}));
  CHECK_THROWS(zero_pad_band(sampled, Band{0, 3, 1}, 4));
}

TEST_CASE("band filter equals a direct-DFT band pass and is a projection") {
  std::mt19937_64 gen(4);
  for (Eigen::Index n : {7, 8, 16}) {
    const std::size_t m = spectral::half_length(static_cast<std::size_t>(n));
    const Matrix x = oracle::random_matrix(n, 3, gen);
    for (const Band band : {Band{1, m, 1}, Band{0, 2, 1}, Band{0, m, 1}}) {
      const Matrix y = band_filter(x, band);
      CHECK((y - oracle::band_pass(x, band.start, band.end)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((band_filter(y, band) - y).cwiseAbs().maxCoeff() < 1e-9);
      const Matrix& op = band_filter_operator(static_cast<std::size_t>(n), band);
      CHECK((op * x - y).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((op - op.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}
