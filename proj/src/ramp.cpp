#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>

#include "fearec/ramp.hpp"
#include "fearec/spectral.hpp"

namespace fearec::ramp {
namespace {

std::size_t round_half_up_clamped(double v, std::size_t hi) {
  const double r = std::floor(v + 0.5);
  if (r <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(r), hi);
}

}  // namespace

RampSchedule::RampSchedule(std::size_t num_layers, std::size_t spectrum_length, double alpha)
    : num_layers_(num_layers), spectrum_length_(spectrum_length), alpha_(alpha) {
  if (num_layers == 0) throw std::invalid_argument("ramp: num_layers must be >= 1");
  if (spectrum_length == 0) throw std::invalid_argument("ramp: spectrum_length must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("ramp: alpha must lie in (0, 1]");
  // alpha * L <= 1 with slack for values such as 1/3 that are not exact in binary.
  mode_ = alpha * static_cast<double>(num_layers) <= 1.0 + 1e-12 ? SamplingMode::partition
                                                                 : SamplingMode::overlapping;
}

Band RampSchedule::band_for_layer(std::size_t layer) const {
  if (layer < 1 || layer > num_layers_) {
    throw std::out_of_range("ramp: layer " + std::to_string(layer) + " outside 1.." +
                            std::to_string(num_layers_));
  }
  const auto m = static_cast<double>(spectrum_length_);
  const auto big_l = static_cast<double>(num_layers_);
  const auto l = static_cast<double>(layer);
  Band band{0, spectrum_length_, layer};

  if (mode_ == SamplingMode::partition) {
    band.start = round_half_up_clamped(m * (big_l - l) / big_l, spectrum_length_);
    band.end = round_half_up_clamped(m * (big_l - l + 1.0) / big_l, spectrum_length_);
  } else if (num_layers_ == 1) {
    band.start = round_half_up_clamped(m * (1.0 - alpha_), spectrum_length_);
    band.end = spectrum_length_;
  } else {
    const double start = m * (1.0 - alpha_) * (1.0 - (l - 1.0) / (big_l - 1.0));
    band.start = round_half_up_clamped(start, spectrum_length_);
    band.end = std::min(band.start + round_half_up_clamped(alpha_ * m, spectrum_length_),
                        spectrum_length_);
  }

  if (band.end <= band.start) {
    if (band.start >= spectrum_length_) band.start = spectrum_length_ - 1;
    band.end = band.start + 1;
  }
  return band;
}

ComplexMatrix sample_band(const ComplexMatrix& spectrum, const Band& band) {
  if (band.end > static_cast<std::size_t>(spectrum.rows()) || band.start >= band.end) {
    throw std::out_of_range("sample_band: band exceeds spectrum rows");
  }
  return spectrum.middleRows(static_cast<Eigen::Index>(band.start),
                             static_cast<Eigen::Index>(band.width()));
}

ComplexMatrix zero_pad_band(const ComplexMatrix& sampled, const Band& band, std::size_t spectrum_length) {
  if (band.end > spectrum_length || band.start >= band.end ||
      static_cast<std::size_t>(sampled.rows()) != band.width()) {
    throw std::invalid_argument("zero_pad_band: shape mismatch");
  }
  ComplexMatrix out = ComplexMatrix::Zero(static_cast<Eigen::Index>(spectrum_length), sampled.cols());
  out.middleRows(static_cast<Eigen::Index>(band.start), sampled.rows()) = sampled;
  return out;
}

Matrix band_filter(const Matrix& x, const Band& band) {
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t m = spectral::half_length(n);
  if (band.start == 0 && band.end == m) return x;
  const ComplexMatrix spec = spectral::rfft_columns(x);
  return spectral::irfft_columns(zero_pad_band(sample_band(spec, band), band, m), n);
}

const Matrix& band_filter_operator(std::size_t n, const Band& band) {
  thread_local std::map<std::tuple<std::size_t, std::size_t, std::size_t>, Matrix> cache;
  const auto key = std::make_tuple(n, band.start, band.end);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const auto size = static_cast<Eigen::Index>(n);
    it = cache.emplace(key, band_filter(Matrix::Identity(size, size), band)).first;
  }
  return it->second;
}

}  // namespace fearec::ramp
