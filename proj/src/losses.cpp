#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fearec/losses.hpp"
#include "fearec/spectral.hpp"

namespace fearec::losses {

double rec_loss(std::span<const double> logits, int target) {
  std::vector<double> unused;
  return rec_loss(logits, target, unused);
}

double rec_loss(std::span<const double> logits, int target, std::vector<double>& grad) {
  if (target <= 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw std::invalid_argument("rec_loss: target " + std::to_string(target) + " is padding or out of range");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) grad[i] = std::exp(logits[i] - log_z);
  grad[static_cast<std::size_t>(target)] -= 1.0;
  return log_z - logits[static_cast<std::size_t>(target)];
}

double contrastive_loss(const Matrix& views_a, const Matrix& views_b, double temperature) {
  return contrastive_loss(views_a, views_b, temperature, nullptr, nullptr);
}

double contrastive_loss(const Matrix& views_a, const Matrix& views_b, double temperature, Matrix* grad_a,
                        Matrix* grad_b) {
  const Eigen::Index b = views_a.rows();
  if (views_b.rows() != b || views_b.cols() != views_a.cols()) {
    throw std::invalid_argument("contrastive_loss: view shape mismatch");
  }
  if (b < 2) throw std::invalid_argument("no negatives");
  if (!(temperature > 0.0)) throw std::invalid_argument("contrastive_loss: temperature must be > 0");

  // Rows 0..B-1 are views_a, rows B..2B-1 are views_b; row r's positive is (r + B) mod 2B.
  const Eigen::Index n = 2 * b;
  Matrix z(n, views_a.cols());
  z.topRows(b) = views_a;
  z.bottomRows(b) = views_b;
  const Matrix sim = (z * z.transpose()) / temperature;

  double loss = 0.0;
  Matrix g = Matrix::Zero(n, n);  // d(loss)/d(sim)
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index pos = (r + b) % n;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c != r) mx = std::max(mx, sim(r, c));
    }
    double denom = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c != r) denom += std::exp(sim(r, c) - mx);
    }
    const double log_denom = mx + std::log(denom);
    loss += log_denom - sim(r, pos);
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c != r) g(r, c) = std::exp(sim(r, c) - log_denom);
    }
    g(r, pos) -= 1.0;
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  if (grad_a || grad_b) {
    const Matrix gz = ((g + g.transpose()) * z) * (inv_b / temperature);
    if (grad_a) *grad_a = gz.topRows(b);
    if (grad_b) *grad_b = gz.bottomRows(b);
  }
  return loss * inv_b;
}

double freq_reg_loss(std::span<const double> a, std::span<const double> b) {
  std::vector<double> unused;
  return freq_reg_loss(a, b, unused);
}

double freq_reg_loss(std::span<const double> a, std::span<const double> b, std::vector<double>& grad_a) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("freq_reg_loss: dimension mismatch");
  const std::size_t d = a.size();
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = a[i] - b[i];
  const auto spec = spectral::rfft(diff);

  double loss = 0.0;
  // d|Z_k|/d diff_n = Re(conj(u_k) e^{-2 pi i n k / D}) with u_k = Z_k / |Z_k|;
  // summing over k is an unnormalized inverse DFT of the half-length phase vector.
  std::vector<spectral::Complex> phase(d, {0.0, 0.0});
  for (std::size_t k = 0; k < spec.coeffs.size(); ++k) {
    const double mag = std::abs(spec.coeffs[k]);
    loss += mag;
    if (mag > 0.0) phase[k] = spec.coeffs[k] / mag;
  }
  spectral::ifft_unnormalized(phase);
  grad_a.resize(d);
  for (std::size_t n = 0; n < d; ++n) grad_a[n] = phase[n].real();
  return loss;
}

double total_loss(double rec, double cl, double freg, const LossWeights& w) {
  if (!std::isfinite(rec) || !std::isfinite(cl) || !std::isfinite(freg)) {
    throw std::domain_error("total_loss: non-finite component (rec=" + std::to_string(rec) + ", cl=" +
                            std::to_string(cl) + ", freg=" + std::to_string(freg) + ")");
  }
  return rec + w.lambda1 * cl + w.lambda2 * freg;
}

}  // namespace fearec::losses
