#include <doctest.h>

#include <cstdlib>

#include "fearec/training.hpp"

using namespace fearec;
using namespace fearec::training;

namespace {

ModelConfig tiny_config(double dropout) {
  ModelConfig cfg;
  cfg.num_items = 20;
  cfg.max_len = 10;
  cfg.dim = 8;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.dropout = dropout;
  return cfg;
}

SequenceBatch toy_batch(std::size_t b) {
  SequenceBatch batch;
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<int> seq;
    for (std::size_t t = 0; t < 4 + i; ++t) seq.push_back(1 + static_cast<int>((3 * i + 5 * t) % 20));
    batch.ids.push_back(data::pad_truncate(seq, 10));
    batch.targets.push_back(1 + static_cast<int>((7 * i + 2) % 20));
    batch.positive_ids.push_back(data::pad_truncate(std::vector<int>(seq.rbegin(), seq.rend()), 10));
  }
  return batch;
}

}  // namespace

TEST_CASE("rec loss falls over repeated steps on one example") {
  const ModelConfig cfg = tiny_config(0.0);
  ModelParams params = ModelParams::initialize(cfg, 1);
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  Adam adam(params, tc);
  const SequenceBatch batch = toy_batch(1);
  const LossWeights rec_only{0.0, 0.0};
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    const auto l = train_step(cfg, params, adam, batch, rec_only, tc, 99);
    if (step == 0) first = l.rec;
    last = l.rec;
    CHECK(params.item_table.row(0).isZero());
  }
  CHECK(last < first);
  CHECK(adam.steps() == 50);
}

TEST_CASE("train step is deterministic for a fixed seed") {
  const ModelConfig cfg = tiny_config(0.3);
  const TrainConfig tc;
  const SequenceBatch batch = toy_batch(5);
  auto run = [&] {
    ModelParams params = ModelParams::initialize(cfg, 4);
    Adam adam(params, tc);
    train_step(cfg, params, adam, batch, {}, tc, 17);
    train_step(cfg, params, adam, batch, {}, tc, 18);
    return params;
  };
  const ModelParams a = run(), b = run();
  std::vector<const Matrix*> bm;
  b.for_each([&](const std::string&, const Matrix& m) { bm.push_back(&m); });
  std::size_t k = 0;
  a.for_each([&](const std::string&, const Matrix& m) { CHECK(m == *bm[k++]); });
}

TEST_CASE("gradients do not depend on the worker count") {
  const ModelConfig cfg = tiny_config(0.3);
  const SequenceBatch batch = toy_batch(11);
  const ModelParams params = ModelParams::initialize(cfg, 5);
  auto grads_with = [&](const char* threads) {
    setenv("FEAREC_THREADS", threads, 1);
    ModelParams g;
    batch_loss(cfg, params, batch, {}, 3, {}, &g);
    return g;
  };
  const ModelParams one = grads_with("1"), four = grads_with("4");
  unsetenv("FEAREC_THREADS");
  std::vector<const Matrix*> fm;
  four.for_each([&](const std::string&, const Matrix& m) { fm.push_back(&m); });
  std::size_t k = 0;
  one.for_each([&](const std::string&, const Matrix& m) { CHECK(m == *fm[k++]); });
}

TEST_CASE("without dropout the two passes give identical views") {
  const ModelConfig cfg = tiny_config(0.0);
  const ModelParams params = ModelParams::initialize(cfg, 6);
  StepViews views;
  GradientOptions opt;
  opt.views = &views;
  batch_loss(cfg, params, toy_batch(3), {}, 1, opt, nullptr);
  CHECK(views.first_pass == views.second_pass);

  const ModelConfig noisy = tiny_config(0.5);
  batch_loss(noisy, params, toy_batch(3), {}, 1, opt, nullptr);
  CHECK(views.first_pass != views.second_pass);
}

TEST_CASE("contrastive term needs a batch of two") {
  const ModelConfig cfg = tiny_config(0.0);
  const ModelParams params = ModelParams::initialize(cfg, 7);
  CHECK_THROWS_WITH(batch_loss(cfg, params, toy_batch(1), {0.1, 0.0}, 1, {}, nullptr), "no negatives");
  CHECK_NOTHROW(batch_loss(cfg, params, toy_batch(1), {0.0, 0.1}, 1, {}, nullptr));
}

TEST_CASE("Adam with zero gradient leaves parameters unchanged") {
  const ModelConfig cfg = tiny_config(0.0);
  ModelParams params = ModelParams::initialize(cfg, 8);
  const ModelParams before = params;
  Adam adam(params, TrainConfig{});
  adam.step(params, ModelParams::zeros_like(params));
  CHECK(params.layers[0].wq == before.layers[0].wq);
  CHECK(params.item_table == before.item_table);
}

TEST_CASE("non-finite gradients are reported by name") {
  const ModelConfig cfg = tiny_config(0.0);
  ModelParams g = ModelParams::zeros_like(ModelParams::initialize(cfg, 9));
  CHECK_NOTHROW(check_finite(g));
  g.layers[0].wk(1, 1) = NAN;
  CHECK_THROWS_WITH(check_finite(g), "non-finite gradient in parameter layer1.Wk");
}

TEST_CASE("configuration validation") {
  TrainConfig tc;
  CHECK_NOTHROW(tc.validate());
  tc.learning_rate = 0.0;
  CHECK_THROWS(tc.validate());
  CHECK_THROWS(validate(LossWeights{-0.1, 0.0}));
  CHECK(format_log_line({3, {1, 2, 3, 4}, 0.5}).starts_with("epoch=3 rec_loss=1.000000 cl_loss=2.000000"));
}

TEST_CASE("finite-difference gradient checks") {
  for (const char* name : {"rec", "freg", "total"}) {
    const auto r = grad_check(parse_grad_check_loss(name));
    INFO(name << " worst " << r.worst_parameter << "[" << r.worst_index << "]");
    CHECK(r.max_rel_error < 1e-3);
    CHECK(r.entries_checked > 500);
  }
  CHECK_THROWS(parse_grad_check_loss("bogus"));
}
