#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "fearec/checks.hpp"
#include "fearec/eval.hpp"
#include "fearec/ramp.hpp"
#include "fearec/rng.hpp"
#include "fearec/spectral.hpp"
#include "fearec/training.hpp"

namespace fearec::checks {
namespace {

using spectral::Complex;

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SuiteResult spectral_suite(Fault fault, unsigned seed) {
  auto forward = [fault](std::span<const double> x) {
    auto s = spectral::rfft(x);
    if (fault == Fault::fft_sign) {
      for (auto& c : s.coeffs) c = std::conj(c);
    }
    return s;
  };
  Rng rng(derive_seed(seed, {1}));
  double dft_err = 0.0, trip_err = 0.0, corr_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    const auto s = forward(x);
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
      Complex direct = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        direct += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n));
      }
      dft_err = std::max(dft_err, std::abs(direct - s.coeffs[k]));
    }
    const auto back = spectral::irfft(s);
    for (std::size_t t = 0; t < n; ++t) trip_err = std::max(trip_err, std::abs(back[t] - x[t]));

    auto sx = forward(x);
    const auto sy = forward(y);
    for (std::size_t k = 0; k < sx.coeffs.size(); ++k) sx.coeffs[k] *= std::conj(sy.coeffs[k]);
    const auto r = spectral::irfft(sx);
    const auto brute = spectral::brute_cross_correlation(x, y);
    for (std::size_t tau = 1; tau <= n; ++tau) corr_err = std::max(corr_err, std::abs(r[tau % n] - brute.at_lag(tau)));
  }
  const bool ok = dft_err < 1e-9 && trip_err < 1e-9 && corr_err < 1e-9;
  return {"spectral", ok,
          fmt("dft_err=%.3g", dft_err) + fmt(" roundtrip_err=%.3g", trip_err) + fmt(" corr_err=%.3g", corr_err)};
}

SuiteResult ramp_suite() {
  std::size_t bad = 0, cases = 0;
  for (std::size_t layers : {1u, 2u, 3u, 4u}) {
    for (std::size_t m : {2u, 5u, 13u, 26u, 64u}) {
      const ramp::RampSchedule part(layers, m, 1.0 / static_cast<double>(layers));
      std::vector<int> hits(m, 0);
      for (std::size_t l = 1; l <= layers; ++l) {
        const auto b = part.band_for_layer(l);
        for (std::size_t i = b.start; i < b.end; ++i) ++hits[i];
      }
      std::size_t overlap = 0;
      for (int h : hits) {
        if (h == 0) ++bad;
        if (h > 1) overlap += static_cast<std::size_t>(h - 1);
      }
      if (overlap > layers - 1) ++bad;
      for (double alpha : {0.6, 0.8, 1.0}) {
        const ramp::RampSchedule over(layers, m, alpha);
        const auto width = static_cast<std::size_t>(std::max(1.0, std::floor(alpha * static_cast<double>(m) + 0.5)));
        std::size_t prev_start = m;
        for (std::size_t l = 1; l <= layers; ++l) {
          const auto b = over.band_for_layer(l);
          if (b.end > m || b.start > prev_start) ++bad;
          if (layers > 1 && b.width() != width) ++bad;
          prev_start = b.start;
        }
      }
      ++cases;
    }
  }
  return {"ramp", bad == 0, std::to_string(cases) + " grids, " + std::to_string(bad) + " violations"};
}

SuiteResult gradient_suite(unsigned seed) {
  using training::GradCheckLoss;
  double worst = 0.0;
  std::string detail;
  for (auto [which, name] : {std::pair{GradCheckLoss::rec, "rec"}, std::pair{GradCheckLoss::freg, "freg"},
                             std::pair{GradCheckLoss::total, "total"}}) {
    const auto r = training::grad_check(which, seed);
    worst = std::max(worst, r.max_rel_error);
    detail += std::string(detail.empty() ? "" : " ") + name + fmt("=%.3g", r.max_rel_error);
  }
  return {"gradient", worst < 1e-3, detail};
}

SuiteResult metrics_suite() {
  std::size_t bad = 0;
  const std::vector<double> unique = {-INFINITY, 0.1, 0.9, 0.3};
  if (eval::rank_of_target(unique, 2) != 1) ++bad;
  const std::vector<double> tie = {-INFINITY, 0.5, 0.5, 0.1};
  if (eval::rank_of_target(tie, 1) != 2) ++bad;
  const std::vector<double> flat(11, 1.0);
  if (eval::rank_of_target(flat, 4) != 10) ++bad;
  const std::vector<std::size_t> perfect = {1, 1, 1};
  const auto p = eval::metrics_from_ranks(perfect, 5);
  if (p.hr != 1.0 || p.ndcg != 1.0) ++bad;
  const std::vector<std::size_t> two = {2};
  if (std::abs(eval::metrics_from_ranks(two, 5).ndcg - 1.0 / std::log2(3.0)) > 1e-12) ++bad;
  const std::vector<std::size_t> miss = {6};
  if (eval::metrics_from_ranks(miss, 5).hr != 0.0) ++bad;
  const std::vector<std::size_t> mixed = {1, 3, 7, 12, 5, 2};
  const auto m5 = eval::metrics_from_ranks(mixed, 5), m10 = eval::metrics_from_ranks(mixed, 10);
  if (!(m5.hr <= m10.hr && m5.ndcg <= m10.ndcg && m5.ndcg <= m5.hr && m10.ndcg <= m10.hr)) ++bad;
  return {"metrics", bad == 0, std::to_string(bad) + " violations"};
}

}  // namespace

Fault parse_fault(const std::string& name) {
  if (name.empty() || name == "none") return Fault::none;
  if (name == "fft-sign") return Fault::fft_sign;
  throw std::invalid_argument("unknown fault '" + name + "' (expected none or fft-sign)");
}

std::vector<SuiteResult> run_all(Fault fault, unsigned seed) {
  return {spectral_suite(fault, seed), ramp_suite(), gradient_suite(seed), metrics_suite()};
}

}  // namespace fearec::checks
