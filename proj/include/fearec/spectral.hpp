#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "fearec/linalg.hpp"

// Real-input FFT, half-spectrum handling and circular correlation.
//
// Convention used everywhere in the project:
//   X_k = sum_{n=0}^{N-1} x_n exp(-2 pi i n k / N)          (forward, unnormalized)
//   x_n = (1/N) sum_{k=0}^{N-1} X_k exp(+2 pi i n k / N)    (inverse)
// Only the first floor(N/2)+1 bins of a real series are stored.
namespace fearec::spectral {

using Complex = std::complex<double>;

inline constexpr std::size_t half_length(std::size_t n) { return n / 2 + 1; }

struct HalfSpectrum {
  std::vector<Complex> coeffs;
  std::size_t origin_length = 0;
};

// Circular correlation indexed by lag: scores[tau - 1] holds lag tau, tau in 1..N.
// Lag N is the zero-shift term.
struct CorrelationProfile {
  std::vector<double> scores;

  double at_lag(std::size_t tau) const { return scores.at(tau - 1); }
  std::size_t size() const { return scores.size(); }
};

// In-place unnormalized complex DFT of arbitrary length. Mixed radix for
// smooth lengths, Bluestein when a large prime factor is present.
void fft(std::span<Complex> data);
void ifft_unnormalized(std::span<Complex> data);

HalfSpectrum rfft(std::span<const double> x);

// Throws "shape mismatch" when coeffs.size() != floor(N/2)+1 and
// "non-symmetric spectrum" when the DC (or even-N Nyquist) bin carries an
// imaginary part the real inverse would have to discard.
std::vector<double> irfft(const HalfSpectrum& s);

// scores[tau-1] = sum_n q_n k_{(n - tau) mod N}, via IDFT(DFT(q) * conj(DFT(k))).
CorrelationProfile cross_correlation_fft(std::span<const double> q, std::span<const double> k);

// Direct O(N^2) circular sum with the same indexing; reference for the FFT route.
CorrelationProfile brute_cross_correlation(std::span<const double> q, std::span<const double> k);

// Column-wise transforms of an [N x D] matrix along the time (row) axis.
ComplexMatrix rfft_columns(const Matrix& x);
// Inverse of rfft_columns. Imaginary parts of the DC/Nyquist bins are dropped
// without checking; callers feed it spectra built from real data.
Matrix irfft_columns(const ComplexMatrix& s, std::size_t n);

}  // namespace fearec::spectral
