#pragma once

#include <cstddef>

#include "fearec/linalg.hpp"

// Frequency ramp: each layer sees one band [start, end) of the half spectrum.
// Lower layers sit at higher frequencies, upper layers at lower ones.
namespace fearec::ramp {

enum class SamplingMode { overlapping, partition };

struct Band {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::size_t layer = 1;  // 1-based

  std::size_t width() const { return end - start; }
  bool operator==(const Band&) const = default;
};

class RampSchedule {
 public:
  RampSchedule(std::size_t num_layers, std::size_t spectrum_length, double alpha);

  std::size_t num_layers() const { return num_layers_; }
  std::size_t spectrum_length() const { return spectrum_length_; }
  double alpha() const { return alpha_; }
  // partition iff alpha <= 1/L
  SamplingMode mode() const { return mode_; }

  // Indices are rounded half-up and clamped to [0, M]; a collapsed band is
  // widened to one bin.
  //   overlapping: start = round(M (1 - alpha)(1 - (l-1)/(L-1))), end = start + round(alpha M)
  //                (L = 1: start = round(M (1 - alpha)), end = M)
  //   partition:   start = round(M (L - l) / L), end = round(M (L - l + 1) / L)
  Band band_for_layer(std::size_t layer) const;

 private:
  std::size_t num_layers_;
  std::size_t spectrum_length_;
  double alpha_;
  SamplingMode mode_;
};

// Rows [band.start, band.end) of an [M x D] spectrum.
ComplexMatrix sample_band(const ComplexMatrix& spectrum, const Band& band);

// Places an [F x D] band back into an otherwise zero [M x D] spectrum.
ComplexMatrix zero_pad_band(const ComplexMatrix& sampled, const Band& band, std::size_t spectrum_length);

// Column-wise band-pass along the time axis:
// irfft(zero_pad_band(sample_band(rfft(x), band))). A symmetric projection.
Matrix band_filter(const Matrix& x, const Band& band);

// The same projection as an [n x n] matrix acting on the time axis, built
// once per (n, band) and cached per thread.
const Matrix& band_filter_operator(std::size_t n, const Band& band);

}  // namespace fearec::ramp
