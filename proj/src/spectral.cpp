#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fearec/spectral.hpp"

namespace fearec::spectral {
namespace {

constexpr double kSymmetryTolerance = 1e-9;

void require_same_length(std::span<const double> q, std::span<const double> k) {
  if (q.size() != k.size()) throw std::invalid_argument("length mismatch");
  if (q.empty()) throw std::invalid_argument("empty series");
}

// Hermitian completion of a half spectrum followed by an unnormalized inverse.
std::vector<Complex> hermitian_inverse(std::span<const Complex> half, std::size_t n) {
  std::vector<Complex> full(n);
  const std::size_t m = half_length(n);
  for (std::size_t k = 0; k < m; ++k) full[k] = half[k];
  for (std::size_t k = m; k < n; ++k) full[k] = std::conj(half[n - k]);
  ifft_unnormalized(full);
  return full;
}

}  // namespace

HalfSpectrum rfft(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("empty series");
  const std::size_t n = x.size();
  std::vector<Complex> buf(x.begin(), x.end());
  fft(buf);
  buf.resize(half_length(n));
  // Exact zeros where a real input guarantees them.
  buf[0].imag(0.0);
  if (n % 2 == 0) buf[n / 2].imag(0.0);
  return {std::move(buf), n};
}

std::vector<double> irfft(const HalfSpectrum& s) {
  const std::size_t n = s.origin_length;
  if (n == 0 || s.coeffs.size() != half_length(n)) throw std::invalid_argument("shape mismatch");
  double scale = 1.0;
  for (const auto& c : s.coeffs) scale = std::max(scale, std::abs(c));
  const bool bad_dc = std::abs(s.coeffs[0].imag()) > kSymmetryTolerance * scale;
  const bool bad_nyquist =
      n % 2 == 0 && std::abs(s.coeffs[n / 2].imag()) > kSymmetryTolerance * scale;
  if (bad_dc || bad_nyquist) throw std::invalid_argument("non-symmetric spectrum");

  auto full = hermitian_inverse(s.coeffs, n);
  std::vector<double> out(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = full[i].real() * inv_n;
  return out;
}

CorrelationProfile cross_correlation_fft(std::span<const double> q, std::span<const double> k) {
  require_same_length(q, k);
  const std::size_t n = q.size();
  auto qs = rfft(q);
  const auto ks = rfft(k);
  for (std::size_t i = 0; i < qs.coeffs.size(); ++i) qs.coeffs[i] *= std::conj(ks.coeffs[i]);
  const auto r = irfft(qs);
  // r[j] is lag j; lag N wraps to j = 0.
  CorrelationProfile out;
  out.scores.resize(n);
  for (std::size_t tau = 1; tau <= n; ++tau) out.scores[tau - 1] = r[tau % n];
  return out;
}

CorrelationProfile brute_cross_correlation(std::span<const double> q, std::span<const double> k) {
  require_same_length(q, k);
  const std::size_t n = q.size();
  CorrelationProfile out;
  out.scores.assign(n, 0.0);
  for (std::size_t tau = 1; tau <= n; ++tau) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += q[i] * k[(i + n - tau % n) % n];
    out.scores[tau - 1] = acc;
  }
  return out;
}

ComplexMatrix rfft_columns(const Matrix& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t m = half_length(n);
  ComplexMatrix out(static_cast<Eigen::Index>(m), x.cols());
  std::vector<Complex> buf(n);
  // Two real columns per complex transform: z = a + ib, then
  // A_k = (Z_k + conj Z_{-k}) / 2 and B_k = (Z_k - conj Z_{-k}) / 2i.
  for (Eigen::Index c = 0; c < x.cols(); c += 2) {
    const bool pair = c + 1 < x.cols();
    for (std::size_t t = 0; t < n; ++t) {
      const auto r = static_cast<Eigen::Index>(t);
      buf[t] = Complex(x(r, c), pair ? x(r, c + 1) : 0.0);
    }
    fft(buf);
    for (std::size_t k = 0; k < m; ++k) {
      const Complex z = buf[k];
      const Complex zc = std::conj(buf[(n - k) % n]);
      Complex a = 0.5 * (z + zc);
      Complex b = Complex(0.0, -0.5) * (z - zc);
      if (k == 0 || 2 * k == n) {
        a.imag(0.0);
        b.imag(0.0);
      }
      out(static_cast<Eigen::Index>(k), c) = a;
      if (pair) out(static_cast<Eigen::Index>(k), c + 1) = b;
    }
  }
  return out;
}

Matrix irfft_columns(const ComplexMatrix& s, std::size_t n) {
  if (static_cast<std::size_t>(s.rows()) != half_length(n)) throw std::invalid_argument("shape mismatch");
  Matrix out(static_cast<Eigen::Index>(n), s.cols());
  std::vector<Complex> half(static_cast<std::size_t>(s.rows()));
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    for (Eigen::Index k = 0; k < s.rows(); ++k) half[static_cast<std::size_t>(k)] = s(k, c);
    const auto full = hermitian_inverse(half, n);
    for (std::size_t t = 0; t < n; ++t) out(static_cast<Eigen::Index>(t), c) = full[t].real() * inv_n;
  }
  return out;
}

}  // namespace fearec::spectral
