#include <doctest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "../oracles.hpp"
#include "fearec/autodiff.hpp"
#include "fearec/ramp.hpp"

using namespace fearec;
using ad::Tape;
using ad::Var;

namespace {

using UnaryOp = std::function<Var(Tape&, Var)>;

// Checks d<seed, f(x)>/dx against central differences.
double input_grad_error(const UnaryOp& f, Matrix x, std::mt19937_64& gen) {
  Matrix seed;
  Matrix analytic;
  {
    Tape t;
    Var in = t.constant(x);
    Var out = f(t, in);
    seed = oracle::random_matrix(out->value.rows(), out->value.cols(), gen);
    t.backward(out, seed);
    analytic = in->has_grad() ? in->grad : Matrix::Zero(x.rows(), x.cols());
  }
  auto value = [&](const Matrix& at) {
    Tape t(false);
    return (f(t, t.constant(at))->value.cwiseProduct(seed)).sum();
  };
  double worst = 0.0;
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + eps;
    const double plus = value(x);
    x.data()[i] = orig - eps;
    const double minus = value(x);
    x.data()[i] = orig;
    worst = std::max(worst, std::abs((plus - minus) / (2 * eps) - analytic.data()[i]));
  }
  return worst;
}

// Same, for a parameter passed by ParamRef.
double param_grad_error(const std::function<Var(Tape&, ad::ParamRef)>& f, Matrix p, std::mt19937_64& gen) {
  Matrix grad = Matrix::Zero(p.rows(), p.cols());
  Matrix seed;
  {
    Tape t;
    Var out = f(t, {&p, &grad});
    seed = oracle::random_matrix(out->value.rows(), out->value.cols(), gen);
    t.backward(out, seed);
  }
  double worst = 0.0;
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double orig = p.data()[i];
    auto value = [&] {
      Tape t(false);
      return (f(t, {&p, nullptr})->value.cwiseProduct(seed)).sum();
    };
    p.data()[i] = orig + eps;
    const double plus = value();
    p.data()[i] = orig - eps;
    const double minus = value();
    p.data()[i] = orig;
    worst = std::max(worst, std::abs((plus - minus) / (2 * eps) - grad.data()[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("roll_rows") {
  Matrix x(4, 1);
  x << 1, 2, 3, 4;
  Matrix expect(4, 1);
  expect << 2, 3, 4, 1;
  CHECK(ad::roll_rows(x, 1) == expect);
  CHECK(ad::roll_rows(x, 4) == x);
  for (int tau = 1; tau < 4; ++tau) CHECK(ad::roll_rows(ad::roll_rows(x, tau), 4 - tau) == x);
  CHECK_THROWS(ad::roll_rows(x, 0));
  CHECK_THROWS(ad::roll_rows(x, 5));
}

TEST_CASE("elementwise and structural ops have exact gradients") {
  std::mt19937_64 gen(1);
  const Matrix x = oracle::random_matrix(5, 4, gen);
  const Matrix other = oracle::random_matrix(5, 4, gen);
  CHECK(input_grad_error([](Tape& t, Var a) { return ad::gelu(t, a); }, x, gen) < 1e-7);
  CHECK(input_grad_error([](Tape& t, Var a) { return ad::scale(t, a, -1.7); }, x, gen) < 1e-7);
  CHECK(input_grad_error([&](Tape& t, Var a) { return ad::add(t, a, t.constant(other)); }, x, gen) < 1e-7);
  CHECK(input_grad_error([&](Tape& t, Var a) { return ad::axpby(t, 0.3, a, 0.7, a); }, x, gen) < 1e-7);
  CHECK(input_grad_error([](Tape& t, Var a) { return ad::slice_columns(t, a, 1, 2); }, x, gen) < 1e-7);
  CHECK(input_grad_error([](Tape& t, Var a) { return ad::select_row(t, a, 3); }, x, gen) < 1e-7);
  CHECK(input_grad_error(
            [](Tape& t, Var a) {
              const std::vector<Var> parts = {ad::slice_columns(t, a, 2, 2), a};
              return ad::concat_columns(t, parts);
            },
            x, gen) < 1e-7);
  const std::vector<bool> keep = {true, false, true, true, false};
  CHECK(input_grad_error([&](Tape& t, Var a) { return ad::mask_rows(t, a, keep); }, x, gen) < 1e-7);
  Matrix mask = Matrix::Constant(5, 4, 2.0);
  mask(1, 2) = 0.0;
  CHECK(input_grad_error([&](Tape& t, Var a) { return ad::dropout(t, a, mask); }, x, gen) < 1e-7);
}

TEST_CASE("parameterized ops have exact gradients") {
  std::mt19937_64 gen(2);
  const Matrix x = oracle::random_matrix(6, 4, gen);
  const Matrix w = oracle::random_matrix(4, 4, gen);
  const Matrix b = oracle::random_matrix(1, 4, gen);
  const Matrix gamma = oracle::random_matrix(1, 4, gen), beta = oracle::random_matrix(1, 4, gen);
  const Matrix wc = w, bc = b, gc = gamma, bec = beta;

  CHECK(input_grad_error([&](Tape& t, Var a) { return ad::matmul(t, a, {&wc, nullptr}); }, x, gen) < 1e-7);
  CHECK(param_grad_error([&](Tape& t, ad::ParamRef p) { return ad::matmul(t, t.constant(x), p); }, w, gen) < 1e-7);
  CHECK(param_grad_error([&](Tape& t, ad::ParamRef p) { return ad::add_row_bias(t, t.constant(x), p); }, b, gen) < 1e-7);
  CHECK(input_grad_error([&](Tape& t, Var a) { return ad::layer_norm(t, a, {&gc, nullptr}, {&bec, nullptr}, 1e-12); },
                         x, gen) < 1e-6);
  CHECK(param_grad_error(
            [&](Tape& t, ad::ParamRef p) { return ad::layer_norm(t, t.constant(x), p, {&bec, nullptr}, 1e-12); },
            gamma, gen) < 1e-7);
  CHECK(param_grad_error(
            [&](Tape& t, ad::ParamRef p) { return ad::layer_norm(t, t.constant(x), {&gc, nullptr}, p, 1e-12); },
            beta, gen) < 1e-7);

  Matrix table = oracle::random_matrix(7, 4, gen);
  table.row(0).setZero();
  const Matrix h = oracle::random_matrix(1, 4, gen);
  Matrix tgrad = Matrix::Zero(7, 4);
  {
    Tape t;
    Var logits = ad::item_logits(t, t.constant(h), {&table, &tgrad});
    CHECK(std::isinf(logits->value(0, 0)));
    Matrix seed = oracle::random_matrix(1, 7, gen);
    t.backward(logits, seed);
    for (Eigen::Index i = 1; i < 7; ++i) CHECK((tgrad.row(i) - seed(0, i) * h).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(tgrad.row(0).isZero());
  }
}

TEST_CASE("embedding gradients skip the padding row") {
  std::mt19937_64 gen(3);
  Matrix items = oracle::random_matrix(5, 3, gen);
  const Matrix pos = oracle::random_matrix(4, 3, gen);
  Matrix gi = Matrix::Zero(5, 3), gp = Matrix::Zero(4, 3);
  const std::vector<int> ids = {0, 2, 2, 4};
  Tape t;
  Var e = ad::embed(t, ids, {&items, &gi}, {&pos, &gp});
  CHECK((e->value.row(1) - (items.row(2) + pos.row(1))).cwiseAbs().maxCoeff() < 1e-15);
  t.backward(e, Matrix::Ones(4, 3));
  CHECK(gi.row(0).isZero());
  CHECK(gi(2, 0) == 2.0);
  CHECK(gi(4, 1) == 1.0);
  CHECK(gp.isApprox(Matrix::Ones(4, 3)));
}

TEST_CASE("band filter op and its adjoint") {
  std::mt19937_64 gen(4);
  const Matrix x = oracle::random_matrix(8, 3, gen);
  const ramp::Band band{1, 4, 1};
  CHECK(input_grad_error([&](Tape& t, Var a) { return ad::band_filter(t, a, band); }, x, gen) < 1e-7);
  Tape t(false);
  CHECK((ad::band_filter(t, t.constant(x), band)->value - oracle::band_pass(x, 1, 4)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("attention head: normalization, masking, gradients") {
  std::mt19937_64 gen(5);
  const Eigen::Index n = 5;
  const Matrix q = oracle::random_matrix(n, 3, gen), k = oracle::random_matrix(n, 3, gen), v = oracle::random_matrix(n, 3, gen);
  Matrix allowed = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 1; j <= i; ++j) allowed(i, j) = 1.0;
  }
  Matrix weights;
  Tape t(false);
  Var out = ad::attention_head(t, t.constant(q), t.constant(k), t.constant(v), allowed, 0.5, &weights);
  CHECK(out->value.row(0).isZero());
  CHECK(weights.row(0).isZero());
  for (Eigen::Index i = 1; i < n; ++i) CHECK(std::abs(weights.row(i).sum() - 1.0) < 1e-12);
  CHECK(weights(3, 4) == 0.0);

  const Matrix kc = k, vc = v, qc = q;
  auto via_q = [&](Tape& tp, Var a) { return ad::attention_head(tp, a, tp.constant(kc), tp.constant(vc), allowed, 0.5, nullptr); };
  auto via_k = [&](Tape& tp, Var a) { return ad::attention_head(tp, tp.constant(qc), a, tp.constant(vc), allowed, 0.5, nullptr); };
  auto via_v = [&](Tape& tp, Var a) { return ad::attention_head(tp, tp.constant(qc), tp.constant(kc), a, allowed, 0.5, nullptr); };
  CHECK(input_grad_error(via_q, q, gen) < 1e-7);
  CHECK(input_grad_error(via_k, k, gen) < 1e-7);
  CHECK(input_grad_error(via_v, v, gen) < 1e-7);
}

TEST_CASE("delay aggregation matches the lag-sum definition") {
  std::mt19937_64 gen(6);
  const Eigen::Index n = 10, d = 3;
  const ramp::Band full{0, 6, 1};
  const Matrix q = oracle::random_matrix(n, d, gen), k = oracle::random_matrix(n, d, gen), v = oracle::random_matrix(n, d, gen);

  // Mean over features of the per-column lag sums.
  std::vector<double> mean(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index c = 0; c < d; ++c) {
    std::vector<double> qc(static_cast<std::size_t>(n)), kc(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) {
      qc[static_cast<std::size_t>(r)] = q(r, c);
      kc[static_cast<std::size_t>(r)] = k(r, c);
    }
    const auto s = oracle::lag_sums(qc, kc);
    for (std::size_t i = 0; i < s.size(); ++i) mean[i] += s[i] / static_cast<double>(d);
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean[static_cast<std::size_t>(a - 1)] > mean[static_cast<std::size_t>(b - 1)]; });

  for (int top_k : {1, 3}) {
    std::vector<ad::DelayChoice> report;
    Tape t(false);
    Var out = ad::delay_aggregate(t, t.constant(q), t.constant(k), t.constant(v), full, top_k, {}, &report);
    REQUIRE(report.size() == static_cast<std::size_t>(top_k));
    double z = 0.0, wsum = 0.0;
    for (int i = 0; i < top_k; ++i) z += std::exp(mean[static_cast<std::size_t>(order[static_cast<std::size_t>(i)] - 1)]);
    Matrix expect = Matrix::Zero(n, d);
    for (int i = 0; i < top_k; ++i) {
      const int lag = order[static_cast<std::size_t>(i)];
      const double w = std::exp(mean[static_cast<std::size_t>(lag - 1)]) / z;
      CHECK(report[static_cast<std::size_t>(i)].lag == lag);
      CHECK(report[static_cast<std::size_t>(i)].weight == doctest::Approx(w).epsilon(1e-9));
      wsum += report[static_cast<std::size_t>(i)].weight;
      for (Eigen::Index r = 0; r < n; ++r) expect.row(r) += w * v.row((r + lag) % n);
    }
    CHECK(std::abs(wsum - 1.0) < 1e-9);
    CHECK((out->value - expect).cwiseAbs().maxCoeff() < 1e-9);
    if (top_k == 1) CHECK(out->value == ad::roll_rows(v, order[0]));
  }
}

TEST_CASE("delay aggregation gradients with frozen lags on band-limited inputs") {
  std::mt19937_64 gen(7);
  const Eigen::Index n = 9;
  const ramp::Band band{1, 4, 1};
  const Matrix q = oracle::band_pass(oracle::random_matrix(n, 2, gen), 1, 4);
  const Matrix k = oracle::band_pass(oracle::random_matrix(n, 2, gen), 1, 4);
  const Matrix v = oracle::random_matrix(n, 2, gen);
  std::vector<ad::DelayChoice> report;
  {
    Tape t(false);
    ad::delay_aggregate(t, t.constant(q), t.constant(k), t.constant(v), band, 3, {}, &report);
  }
  std::vector<int> lags;
  for (const auto& r : report) lags.push_back(r.lag);
  // Perturbations leave the band, so differentiate through the filter as the encoder does.
  auto through = [&](Tape& t, Var a, int which) {
    Var qq = ad::band_filter(t, which == 0 ? a : t.constant(q), band);
    Var kk = ad::band_filter(t, which == 1 ? a : t.constant(k), band);
    Var vv = which == 2 ? a : t.constant(v);
    return ad::delay_aggregate(t, qq, kk, vv, band, 3, lags, nullptr);
  };
  CHECK(input_grad_error([&](Tape& t, Var a) { return through(t, a, 0); }, q, gen) < 1e-7);
  CHECK(input_grad_error([&](Tape& t, Var a) { return through(t, a, 1); }, k, gen) < 1e-7);
  CHECK(input_grad_error([&](Tape& t, Var a) { return through(t, a, 2); }, v, gen) < 1e-7);
}

TEST_CASE("tape without recording refuses backward") {
  Tape t(false);
  Var x = t.constant(Matrix::Ones(2, 2));
  CHECK_THROWS(t.backward(x, Matrix::Ones(2, 2)));
}
