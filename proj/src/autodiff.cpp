#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "fearec/autodiff.hpp"
#include "fearec/spectral.hpp"

namespace fearec::ad {

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::push(Matrix value, std::function<void(Node&)> backward) {
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  if (record_) node->backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

void Tape::backward(Var root, const Matrix& seed) {
  if (!record_) throw std::logic_error("backward on a tape that does not record");
  root->grad_buffer() += seed;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && n.has_grad()) n.backward(n);
  }
}

Var add(Tape& t, Var a, Var b) {
  return t.push(a->value + b->value, [a, b](Node& self) {
    a->grad_buffer() += self.grad;
    b->grad_buffer() += self.grad;
  });
}

Var scale(Tape& t, Var a, double s) {
  return t.push(a->value * s, [a, s](Node& self) { a->grad_buffer() += self.grad * s; });
}

Var axpby(Tape& t, double a, Var x, double b, Var y) {
  return t.push(a * x->value + b * y->value, [a, x, b, y](Node& self) {
    if (a != 0.0) x->grad_buffer() += a * self.grad;
    if (b != 0.0) y->grad_buffer() += b * self.grad;
  });
}

Var matmul(Tape& t, Var x, ParamRef w) {
  return t.push(x->value * w.v(), [x, w](Node& self) {
    x->grad_buffer().noalias() += self.grad * w.v().transpose();
    if (w.grad) w.grad->noalias() += x->value.transpose() * self.grad;
  });
}

Var add_row_bias(Tape& t, Var x, ParamRef bias) {
  Matrix out = x->value;
  out.rowwise() += bias.v().row(0);
  return t.push(std::move(out), [x, bias](Node& self) {
    x->grad_buffer() += self.grad;
    if (bias.grad) bias.grad->row(0) += self.grad.colwise().sum();
  });
}

Var gelu(Tape& t, Var x) {
  const Matrix& in = x->value;
  Matrix out = in.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
  return t.push(std::move(out), [x](Node& self) {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = x->value.unaryExpr([inv_sqrt_2pi](double v) {
      return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)) + v * std::exp(-0.5 * v * v) * inv_sqrt_2pi;
    });
    x->grad_buffer() += self.grad.cwiseProduct(d);
  });
}

Var layer_norm(Tape& t, Var x, ParamRef gamma, ParamRef beta, double eps) {
  const Matrix& in = x->value;
  const Eigen::Index rows = in.rows();
  const Eigen::Index cols = in.cols();
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.v().row(0).array();
  out.rowwise() += beta.v().row(0);
  return t.push(std::move(out), [x, gamma, beta, xhat = std::move(xhat), inv_std](Node& self) {
    const Matrix& g = self.grad;
    Matrix dxhat = g;
    dxhat.array().rowwise() *= gamma.v().row(0).array();
    Matrix& dx = x->grad_buffer();
    const auto n = static_cast<double>(g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double mean_d = dxhat.row(r).sum() / n;
      const double mean_dx = dxhat.row(r).dot(xhat.row(r)) / n;
      dx.row(r).array() += inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
    }
    if (gamma.grad) gamma.grad->row(0) += g.cwiseProduct(xhat).colwise().sum();
    if (beta.grad) beta.grad->row(0) += g.colwise().sum();
  });
}

Var mask_rows(Tape& t, Var x, const std::vector<bool>& keep) {
  if (static_cast<Eigen::Index>(keep.size()) != x->value.rows()) throw std::invalid_argument("mask_rows: shape mismatch");
  std::vector<bool> k = keep;
  Matrix out = x->value;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    if (!k[static_cast<std::size_t>(r)]) out.row(r).setZero();
  }
  return t.push(std::move(out), [x, k = std::move(k)](Node& self) {
    Matrix& dx = x->grad_buffer();
    for (Eigen::Index r = 0; r < dx.rows(); ++r) {
      if (k[static_cast<std::size_t>(r)]) dx.row(r) += self.grad.row(r);
    }
  });
}

Var dropout(Tape& t, Var x, const Matrix& mask) {
  if (mask.size() == 0) return x;
  return t.push(x->value.cwiseProduct(mask),
                [x, mask](Node& self) { x->grad_buffer() += self.grad.cwiseProduct(mask); });
}

Var slice_columns(Tape& t, Var x, Eigen::Index begin, Eigen::Index width) {
  return t.push(x->value.middleCols(begin, width), [x, begin, width](Node& self) {
    x->grad_buffer().middleCols(begin, width) += self.grad;
  });
}

Var concat_columns(Tape& t, std::span<const Var> parts) {
  Eigen::Index cols = 0;
  for (Var p : parts) cols += p->value.cols();
  Matrix out(parts.front()->value.rows(), cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, p->value.cols()) = p->value;
    at += p->value.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(out), [inputs = std::move(inputs)](Node& self) {
    Eigen::Index off = 0;
    for (Var p : inputs) {
      p->grad_buffer() += self.grad.middleCols(off, p->value.cols());
      off += p->value.cols();
    }
  });
}

Var select_row(Tape& t, Var x, Eigen::Index row) {
  return t.push(x->value.row(row), [x, row](Node& self) { x->grad_buffer().row(row) += self.grad.row(0); });
}

Var embed(Tape& t, std::span<const int> ids, ParamRef item_table, ParamRef pos_table) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n > pos_table.v().rows()) throw std::invalid_argument("embed: sequence longer than position table");
  Matrix out(n, item_table.v().cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const int id = ids[static_cast<std::size_t>(r)];
    if (id < 0 || id >= item_table.v().rows()) throw std::out_of_range("embed: item id out of range");
    out.row(r) = item_table.v().row(id) + pos_table.v().row(r);
  }
  std::vector<int> id_copy(ids.begin(), ids.end());
  return t.push(std::move(out), [item_table, pos_table, id_copy = std::move(id_copy)](Node& self) {
    for (Eigen::Index r = 0; r < self.grad.rows(); ++r) {
      const int id = id_copy[static_cast<std::size_t>(r)];
      // Padding row stays frozen.
      if (item_table.grad && id != 0) item_table.grad->row(id) += self.grad.row(r);
      if (pos_table.grad) pos_table.grad->row(r) += self.grad.row(r);
    }
  });
}

Var band_filter(Tape& t, Var x, const ramp::Band& band) {
  const Matrix& op = ramp::band_filter_operator(static_cast<std::size_t>(x->value.rows()), band);
  return t.push(op * x->value, [x, &op](Node& self) { x->grad_buffer().noalias() += op.transpose() * self.grad; });
}

Var attention_head(Tape& t, Var q, Var k, Var v, const Matrix& allowed, double scale, Matrix* weights_out) {
  const Eigen::Index n = q->value.rows();
  Matrix scores = (q->value * k->value.transpose()) * scale;
  Matrix weights = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (allowed(i, j) != 0.0) mx = std::max(mx, scores(i, j));
    }
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (allowed(i, j) != 0.0) {
        weights(i, j) = std::exp(scores(i, j) - mx);
        z += weights(i, j);
      }
    }
    weights.row(i) /= z;
  }
  if (weights_out) *weights_out = weights;
  Matrix out = weights * v->value;
  return t.push(std::move(out), [q, k, v, weights = std::move(weights), scale](Node& self) {
    const Matrix& g = self.grad;
    v->grad_buffer().noalias() += weights.transpose() * g;
    Matrix dw = g * v->value.transpose();
    // softmax backward, row by row
    Matrix ds = weights.cwiseProduct(dw);
    const Eigen::VectorXd row_dot = ds.rowwise().sum();
    ds -= weights.cwiseProduct(row_dot.replicate(1, weights.cols()));
    q->grad_buffer().noalias() += (ds * k->value) * scale;
    k->grad_buffer().noalias() += (ds.transpose() * q->value) * scale;
  });
}

Matrix roll_rows(const Matrix& x, int tau) {
  const Eigen::Index n = x.rows();
  if (tau < 1 || tau > n) throw std::out_of_range("roll_rows: lag outside 1..N");
  Matrix out(n, x.cols());
  for (Eigen::Index r = 0; r < n; ++r) out.row(r) = x.row((r + tau) % n);
  return out;
}

Var delay_aggregate(Tape& t, Var q, Var k, Var v, const ramp::Band& band, int top_k,
                    std::span<const int> frozen_lags, std::vector<DelayChoice>* report) {
  const Eigen::Index n = q->value.rows();
  const Eigen::Index d = q->value.cols();
  const auto m = spectral::half_length(static_cast<std::size_t>(n));

  // Band-limited cross-spectrum, zero-padded back to the full half spectrum.
  const ComplexMatrix qs = ramp::sample_band(spectral::rfft_columns(q->value), band);
  const ComplexMatrix ks = ramp::sample_band(spectral::rfft_columns(k->value), band);
  // The feature mean commutes with the inverse transform, so average the cross-spectra first.
  const ComplexMatrix cross = qs.cwiseProduct(ks.conjugate()).rowwise().mean();
  const Matrix corr = spectral::irfft_columns(ramp::zero_pad_band(cross, band, m), static_cast<std::size_t>(n));
  // index tau-1 holds lag tau
  std::vector<double> mean_corr(static_cast<std::size_t>(n));
  for (Eigen::Index tau = 1; tau <= n; ++tau) mean_corr[static_cast<std::size_t>(tau - 1)] = corr(tau % n, 0);

  std::vector<int> lags;
  if (!frozen_lags.empty()) {
    lags.assign(frozen_lags.begin(), frozen_lags.end());
  } else {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 1);
    const auto kk = static_cast<std::size_t>(std::clamp<Eigen::Index>(top_k, 1, n));
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return mean_corr[static_cast<std::size_t>(a - 1)] > mean_corr[static_cast<std::size_t>(b - 1)];
    });
    lags.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk));
  }

  const std::size_t kk = lags.size();
  std::vector<double> w(kk);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kk; ++i) mx = std::max(mx, mean_corr[static_cast<std::size_t>(lags[i] - 1)]);
  double z = 0.0;
  for (std::size_t i = 0; i < kk; ++i) {
    w[i] = std::exp(mean_corr[static_cast<std::size_t>(lags[i] - 1)] - mx);
    z += w[i];
  }
  for (auto& wi : w) wi /= z;

  if (report) {
    report->clear();
    for (std::size_t i = 0; i < kk; ++i) report->push_back({lags[i], w[i]});
  }

  Matrix out = Matrix::Zero(n, d);
  for (std::size_t i = 0; i < kk; ++i) out += w[i] * roll_rows(v->value, lags[i]);

  return t.push(std::move(out), [q, k, v, lags = std::move(lags), w = std::move(w), n, d](Node& self) {
    const Matrix& g = self.grad;
    const std::size_t kk = lags.size();
    std::vector<double> dw(kk);
    Matrix& dv = v->grad_buffer();
    for (std::size_t i = 0; i < kk; ++i) {
      const int tau = lags[i];
      double acc = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index src = (r + tau) % n;
        acc += g.row(r).dot(v->value.row(src));
        dv.row(src) += w[i] * g.row(r);
      }
      dw[i] = acc;
    }
    double wdw = 0.0;
    for (std::size_t i = 0; i < kk; ++i) wdw += w[i] * dw[i];
    Matrix& dq = q->grad_buffer();
    Matrix& dk = k->grad_buffer();
    // score(tau) = (1/d) sum_c sum_r q[r,c] k[(r - tau) mod N, c]
    for (std::size_t i = 0; i < kk; ++i) {
      const double ds = w[i] * (dw[i] - wdw) / static_cast<double>(d);
      if (ds == 0.0) continue;
      const Eigen::Index tau = lags[i] % n;
      for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index shifted = (r - tau + n) % n;
        dq.row(r) += ds * k->value.row(shifted);
        dk.row(shifted) += ds * q->value.row(r);
      }
    }
  });
}

Var item_logits(Tape& t, Var h, ParamRef item_table) {
  const Matrix& table = item_table.v();
  Matrix out = h->value * table.transpose();
  out(0, 0) = -std::numeric_limits<double>::infinity();
  return t.push(std::move(out), [h, item_table](Node& self) {
    const Matrix& table = item_table.v();
    const Eigen::Index items = table.rows() - 1;
    const auto g = self.grad.rightCols(items);
    h->grad_buffer().noalias() += g * table.bottomRows(items);
    if (item_table.grad) item_table.grad->bottomRows(items).noalias() += g.transpose() * h->value;
  });
}

}  // namespace fearec::ad
