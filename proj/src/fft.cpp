#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "fearec/spectral.hpp"

namespace fearec::spectral {
namespace {

// Prime factors above this go through Bluestein instead of an O(p^2) butterfly.
constexpr std::size_t kMaxDirectRadix = 13;

std::vector<std::size_t> factorize(std::size_t n) {
  std::vector<std::size_t> factors;
  for (std::size_t p = 2; p * p <= n; ++p) {
    while (n % p == 0) {
      factors.push_back(p);
      n /= p;
    }
  }
  if (n > 1) factors.push_back(n);
  return factors;
}

class Plan;
const Plan& plan_for(std::size_t n);

// Forward-only plan; the inverse is obtained with the conjugation identity.
class Plan {
 public:
  explicit Plan(std::size_t n) : n_(n) {
    twiddles_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      twiddles_[i] = Complex(std::cos(phase), std::sin(phase));
    }
    const auto primes = factorize(n);
    use_bluestein_ = !primes.empty() && primes.back() > kMaxDirectRadix;
    if (use_bluestein_) {
      init_bluestein();
    } else {
      // Stages as (radix, remaining length) pairs, recursion order.
      std::size_t remaining = n;
      for (std::size_t p : primes) {
        remaining /= p;
        stages_.push_back(p);
        stages_.push_back(remaining);
      }
    }
  }

  void execute(std::span<Complex> data) const {
    if (n_ <= 1) return;
    if (use_bluestein_) {
      bluestein(data);
      return;
    }
    std::vector<Complex> out(n_);
    work(out.data(), data.data(), 1, stages_.data());
    std::copy(out.begin(), out.end(), data.begin());
  }

 private:
  void work(Complex* out, const Complex* in, std::size_t fstride, const std::size_t* stage) const {
    const std::size_t p = stage[0];
    const std::size_t m = stage[1];
    Complex* const begin = out;
    Complex* const end = out + p * m;
    if (m == 1) {
      for (Complex* o = out; o != end; ++o, in += fstride) *o = *in;
    } else {
      for (Complex* o = out; o != end; o += m, in += fstride) work(o, in, fstride * p, stage + 2);
    }
    if (p == 2) {
      butterfly2(begin, fstride, m);
    } else {
      butterfly_generic(begin, fstride, m, p);
    }
  }

  void butterfly2(Complex* out, std::size_t fstride, std::size_t m) const {
    for (std::size_t k = 0; k < m; ++k) {
      const Complex t = out[k + m] * twiddles_[k * fstride];
      out[k + m] = out[k] - t;
      out[k] += t;
    }
  }

  void butterfly_generic(Complex* out, std::size_t fstride, std::size_t m, std::size_t p) const {
    std::vector<Complex> scratch(p);
    for (std::size_t u = 0; u < m; ++u) {
      std::size_t k = u;
      for (std::size_t q = 0; q < p; ++q, k += m) scratch[q] = out[k];
      k = u;
      for (std::size_t q1 = 0; q1 < p; ++q1, k += m) {
        std::size_t tw = 0;
        Complex acc = scratch[0];
        for (std::size_t q = 1; q < p; ++q) {
          tw += fstride * k;
          tw %= n_;
          acc += scratch[q] * twiddles_[tw];
        }
        out[k] = acc;
      }
    }
  }

  void init_bluestein() {
    conv_len_ = 1;
    while (conv_len_ < 2 * n_ - 1) conv_len_ <<= 1;
    chirp_.resize(n_);
    const std::size_t two_n = 2 * n_;
    for (std::size_t k = 0; k < n_; ++k) {
      // k^2 mod 2N keeps the phase argument small.
      const std::size_t k2 = (k * k) % two_n;
      const double phase = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n_);
      chirp_[k] = Complex(std::cos(phase), std::sin(phase));
    }
    kernel_spectrum_.assign(conv_len_, Complex(0.0, 0.0));
    kernel_spectrum_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n_; ++k) {
      kernel_spectrum_[k] = std::conj(chirp_[k]);
      kernel_spectrum_[conv_len_ - k] = std::conj(chirp_[k]);
    }
    plan_for(conv_len_).execute(kernel_spectrum_);
  }

  void bluestein(std::span<Complex> data) const {
    const Plan& inner = plan_for(conv_len_);
    std::vector<Complex> a(conv_len_, Complex(0.0, 0.0));
    for (std::size_t k = 0; k < n_; ++k) a[k] = data[k] * chirp_[k];
    inner.execute(a);
    for (std::size_t i = 0; i < conv_len_; ++i) a[i] *= kernel_spectrum_[i];
    for (auto& v : a) v = std::conj(v);
    inner.execute(a);
    const double scale = 1.0 / static_cast<double>(conv_len_);
    for (std::size_t k = 0; k < n_; ++k) data[k] = std::conj(a[k]) * scale * chirp_[k];
  }

  std::size_t n_;
  std::vector<Complex> twiddles_;
  std::vector<std::size_t> stages_;
  bool use_bluestein_ = false;
  std::size_t conv_len_ = 0;
  std::vector<Complex> chirp_;
  std::vector<Complex> kernel_spectrum_;
};

const Plan& plan_for(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<Plan>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<Plan>(n)).first;
  return *it->second;
}

}  // namespace

void fft(std::span<Complex> data) { plan_for(data.size()).execute(data); }

void ifft_unnormalized(std::span<Complex> data) {
  for (auto& v : data) v = std::conj(v);
  plan_for(data.size()).execute(data);
  for (auto& v : data) v = std::conj(v);
}

}  // namespace fearec::spectral
