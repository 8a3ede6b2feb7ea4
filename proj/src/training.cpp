#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fearec/parallel.hpp"
#include "fearec/rng.hpp"
#include "fearec/training.hpp"

namespace fearec::training {
namespace {

// Gradients are accumulated per contiguous shard of the batch and reduced in
// shard order, which fixes the summation order independently of thread count.
constexpr std::size_t kShards = 8;

enum Pass : std::uint64_t { kRecPass = 0, kViewPass = 1, kPositivePass = 2 };

std::vector<Matrix*> tensors(ModelParams& p) {
  std::vector<Matrix*> out;
  p.for_each([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<std::string> tensor_names(const ModelParams& p) {
  std::vector<std::string> out;
  p.for_each([&](const std::string& name, const Matrix&) { out.push_back(name); });
  return out;
}

struct PassContext {
  const ModelConfig& cfg;
  const ModelParams& params;
  std::uint64_t stream_seed;
  const GradientOptions& opt;
};

// Encodes one pass and returns the readout row.
ad::Var encode_pass(ad::Tape& tape, const PassContext& ctx, ModelParams* grads, const std::vector<int>& ids,
                    std::size_t example, Pass pass) {
  Rng rng(derive_seed(ctx.stream_seed, {example, pass}));
  encoder::ForwardOptions fwd;
  fwd.train = true;
  fwd.rng = &rng;
  const std::size_t slot = 3 * example + pass;
  if (ctx.opt.replay_lags) fwd.frozen_lags = &ctx.opt.replay_lags->at(slot);
  const encoder::Model model{ctx.cfg, ctx.params, grads};
  const encoder::Encoded enc = encoder::encode(tape, model, ids, fwd);
  if (ctx.opt.record_lags) (*ctx.opt.record_lags)[slot] = enc.lag_plan();
  return ad::select_row(tape, enc.hidden, encoder::readout_position(enc.valid));
}

void copy_row(Matrix& dst, std::size_t row, const Matrix& src) { dst.row(static_cast<Eigen::Index>(row)) = src.row(0); }

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("config: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("config: adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("config: adam_eps must be > 0");
  if (!(cl_temperature > 0.0)) throw std::invalid_argument("config: cl_temperature must be > 0");
  if (patience < 0) throw std::invalid_argument("config: patience must be >= 0");
}

void validate(const LossWeights& w) {
  if (!(w.lambda1 >= 0.0) || !std::isfinite(w.lambda1)) throw std::invalid_argument("config: lambda1 must be finite and >= 0");
  if (!(w.lambda2 >= 0.0) || !std::isfinite(w.lambda2)) throw std::invalid_argument("config: lambda2 must be finite and >= 0");
}

SequenceBatch materialize(const std::vector<data::TrainingExample>& examples, const data::Batch& batch) {
  SequenceBatch out;
  for (std::size_t i = 0; i < batch.examples.size(); ++i) {
    const auto& ex = examples.at(batch.examples[i]);
    out.ids.push_back(ex.ids);
    out.targets.push_back(ex.target);
    out.positive_ids.push_back(examples.at(batch.positives.at(i)).ids);
  }
  return out;
}

LossBreakdown batch_loss(const ModelConfig& cfg, const ModelParams& params, const SequenceBatch& batch,
                         const LossWeights& w, std::uint64_t stream_seed, const GradientOptions& opt,
                         ModelParams* grads) {
  const std::size_t b = batch.size();
  if (b == 0) throw std::invalid_argument("batch_loss: empty batch");
  if (batch.targets.size() != b || batch.positive_ids.size() != b) throw std::invalid_argument("batch_loss: ragged batch");
  if (opt.record_lags) opt.record_lags->assign(3 * b, {});

  const bool use_cl = w.lambda1 > 0.0;
  const bool use_freg = w.lambda2 > 0.0;
  const bool need_views = use_cl || use_freg || opt.views;
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const double inv_b = 1.0 / static_cast<double>(b);
  const PassContext ctx{cfg, params, stream_seed, opt};

  Matrix first(static_cast<Eigen::Index>(b), d), second(static_cast<Eigen::Index>(b), d),
      positive(static_cast<Eigen::Index>(b), d);
  std::vector<double> rec_terms(b, 0.0);
  const std::size_t shards = std::min(kShards, b);
  std::vector<ModelParams> shard_grads;
  if (grads) shard_grads.assign(shards, ModelParams::zeros_like(params));
  auto shard_range = [&](std::size_t s) { return std::pair{s * b / shards, (s + 1) * b / shards}; };

  // Phase 1: recommendation loss with gradients; view passes forward only.
  parallel_for(shards, [&](std::size_t s) {
    ModelParams* g = grads ? &shard_grads[s] : nullptr;
    const auto [lo, hi] = shard_range(s);
    for (std::size_t i = lo; i < hi; ++i) {
      {
        ad::Tape tape(g != nullptr);
        const ad::Var row = encode_pass(tape, ctx, g, batch.ids[i], i, kRecPass);
        const ad::Var logits = ad::item_logits(tape, row, {&params.item_table, g ? &g->item_table : nullptr});
        std::vector<double> dlogits;
        const std::span<const double> lv(logits->value.data(), static_cast<std::size_t>(logits->value.size()));
        rec_terms[i] = losses::rec_loss(lv, batch.targets[i], dlogits);
        copy_row(first, i, row->value);
        if (g && opt.rec_weight != 0.0) {
          Matrix seed = Eigen::Map<Matrix>(dlogits.data(), 1, logits->value.cols()) * (opt.rec_weight * inv_b);
          tape.backward(logits, seed);
        }
      }
      if (need_views) {
        ad::Tape tape(false);
        copy_row(second, i, encode_pass(tape, ctx, nullptr, batch.ids[i], i, kViewPass)->value);
        copy_row(positive, i, encode_pass(tape, ctx, nullptr, batch.positive_ids[i], i, kPositivePass)->value);
      }
    }
  });

  LossBreakdown out;
  for (double r : rec_terms) out.rec += r;
  out.rec *= inv_b;

  Matrix grad_second = Matrix::Zero(static_cast<Eigen::Index>(b), d);
  Matrix grad_positive = Matrix::Zero(static_cast<Eigen::Index>(b), d);
  if (use_cl) {
    Matrix ga, gp;
    out.cl = losses::contrastive_loss(second, positive, opt.cl_temperature, &ga, &gp);
    grad_second += w.lambda1 * ga;
    grad_positive += w.lambda1 * gp;
  }
  if (use_freg) {
    std::vector<double> g;
    for (std::size_t i = 0; i < b; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const Matrix a = second.row(r);
      const Matrix p = positive.row(r);
      out.freg += losses::freq_reg_loss({a.data(), static_cast<std::size_t>(d)},
                                        {p.data(), static_cast<std::size_t>(d)}, g) * inv_b;
      const Eigen::Map<const Matrix> gr(g.data(), 1, d);
      grad_second.row(r) += (w.lambda2 * inv_b) * gr;
      grad_positive.row(r) -= (w.lambda2 * inv_b) * gr;
    }
  }
  out.total = losses::total_loss(opt.rec_weight * out.rec, out.cl, out.freg, w);

  // Phase 2: replay the view passes on a recording tape and push the view gradients through them.
  if (grads && (use_cl || use_freg)) {
    parallel_for(shards, [&](std::size_t s) {
      ModelParams* g = &shard_grads[s];
      const auto [lo, hi] = shard_range(s);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        {
          ad::Tape tape(true);
          const ad::Var row = encode_pass(tape, ctx, g, batch.ids[i], i, kViewPass);
          tape.backward(row, grad_second.row(r));
        }
        {
          ad::Tape tape(true);
          const ad::Var row = encode_pass(tape, ctx, g, batch.positive_ids[i], i, kPositivePass);
          tape.backward(row, grad_positive.row(r));
        }
      }
    });
  }

  if (grads) {
    *grads = std::move(shard_grads.front());
    for (std::size_t s = 1; s < shards; ++s) grads->add(shard_grads[s]);
  }
  if (opt.views) *opt.views = {std::move(first), std::move(second), std::move(positive)};
  return out;
}

Adam::Adam(const ModelParams& like, const TrainConfig& cfg)
    : cfg_(cfg), m_(ModelParams::zeros_like(like)), v_(ModelParams::zeros_like(like)) {}

void Adam::step(ModelParams& params, const ModelParams& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
  auto p = tensors(params);
  auto g = tensors(const_cast<ModelParams&>(grads));
  auto m = tensors(m_);
  auto v = tensors(v_);
  if (p.size() != g.size() || p.size() != m.size()) throw std::invalid_argument("Adam: parameter layout mismatch");
  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  for (std::size_t k = 0; k < p.size(); ++k) {
    *m[k] = b1 * *m[k] + (1.0 - b1) * *g[k];
    *v[k] = b2 * *v[k] + (1.0 - b2) * g[k]->cwiseProduct(*g[k]);
    const auto step = (m[k]->array() / bc1) / ((v[k]->array() / bc2).sqrt() + cfg_.adam_eps);
    p[k]->array() -= cfg_.learning_rate * step;
  }
}

void check_finite(const ModelParams& grads) {
  grads.for_each([](const std::string& name, const Matrix& g) {
    if (!g.allFinite()) throw std::runtime_error("non-finite gradient in parameter " + name);
  });
}

LossBreakdown train_step(const ModelConfig& cfg, ModelParams& params, Adam& adam, const SequenceBatch& batch,
                         const LossWeights& w, const TrainConfig& tcfg, std::uint64_t step_seed, StepViews* views) {
  GradientOptions opt;
  opt.cl_temperature = tcfg.cl_temperature;
  opt.views = views;
  ModelParams grads;
  const LossBreakdown loss = batch_loss(cfg, params, batch, w, step_seed, opt, &grads);
  check_finite(grads);
  adam.step(params, grads);
  params.item_table.row(0).setZero();
  return loss;
}

EpochStats train_epoch(const ModelConfig& cfg, ModelParams& params, Adam& adam,
                       const std::vector<data::TrainingExample>& examples, const data::SemanticIndex& index,
                       const LossWeights& w, const TrainConfig& tcfg, int epoch) {
  const auto start = std::chrono::steady_clock::now();
  const auto e = static_cast<std::uint64_t>(epoch);
  const auto batches = data::make_batches(examples, index, tcfg.batch_size, tcfg.seed, e);
  EpochStats stats;
  stats.epoch = epoch;
  for (std::size_t k = 0; k < batches.size(); ++k) {
    const LossBreakdown l = train_step(cfg, params, adam, materialize(examples, batches[k]), w, tcfg,
                                       derive_seed(tcfg.seed, {e, k, 0x73746570ULL}));
    stats.loss.rec += l.rec;
    stats.loss.cl += l.cl;
    stats.loss.freg += l.freg;
    stats.loss.total += l.total;
  }
  if (!batches.empty()) {
    const double n = static_cast<double>(batches.size());
    stats.loss.rec /= n;
    stats.loss.cl /= n;
    stats.loss.freg /= n;
    stats.loss.total /= n;
  }
  stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

std::string format_log_line(const EpochStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "epoch=%d rec_loss=%.6f cl_loss=%.6f freg_loss=%.6f total=%.6f wall_seconds=%.3f",
                s.epoch, s.loss.rec, s.loss.cl, s.loss.freg, s.loss.total, s.wall_seconds);
  return buf;
}

GradCheckLoss parse_grad_check_loss(const std::string& name) {
  if (name == "rec") return GradCheckLoss::rec;
  if (name == "freg") return GradCheckLoss::freg;
  if (name == "total") return GradCheckLoss::total;
  throw std::invalid_argument("unknown grad-check loss '" + name + "' (expected rec, freg or total)");
}

GradCheckResult grad_check(GradCheckLoss which, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.num_items = 12;
  cfg.max_len = 8;
  cfg.dim = 8;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.alpha = 0.8;
  cfg.dropout = 0.0;
  cfg.validate();

  // Well-scaled random weights keep every gradient entry far from round-off.
  ModelParams params = ModelParams::initialize(cfg, seed);
  Rng rng(derive_seed(seed, {0x6763ULL}));
  params.for_each([&](const std::string& name, Matrix& m) {
    const bool is_gamma = name.ends_with("gamma");
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (is_gamma ? 1.0 : 0.0) + 0.5 * rng.normal();
  });
  params.item_table.row(0).setZero();

  SequenceBatch batch;
  const int lengths[] = {8, 5, 3};
  for (int len : lengths) {
    std::vector<int> seq, pos;
    for (int t = 0; t < len; ++t) seq.push_back(1 + static_cast<int>(rng.below(12)));
    for (int t = 0; t < 6; ++t) pos.push_back(1 + static_cast<int>(rng.below(12)));
    batch.ids.push_back(data::pad_truncate(seq, cfg.max_len));
    batch.targets.push_back(1 + static_cast<int>(rng.below(12)));
    batch.positive_ids.push_back(data::pad_truncate(pos, cfg.max_len));
  }

  LossWeights w{0.0, 0.0};
  GradientOptions opt;
  switch (which) {
    case GradCheckLoss::rec:
      break;
    case GradCheckLoss::freg:
      opt.rec_weight = 0.0;
      w.lambda2 = 1.0;
      break;
    case GradCheckLoss::total:
      w = LossWeights{};
      break;
  }

  std::vector<encoder::LagPlan> lags;
  opt.record_lags = &lags;
  ModelParams analytic;
  batch_loss(cfg, params, batch, w, seed, opt, &analytic);
  opt.record_lags = nullptr;
  opt.replay_lags = &lags;

  constexpr double eps = 1e-4;
  GradCheckResult result;
  const auto names = tensor_names(params);
  auto values = tensors(params);
  auto grads = tensors(analytic);
  for (std::size_t k = 0; k < values.size(); ++k) {
    Matrix& m = *values[k];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + eps;
      const double plus = batch_loss(cfg, params, batch, w, seed, opt, nullptr).total;
      m.data()[i] = orig - eps;
      const double minus = batch_loss(cfg, params, batch, w, seed, opt, nullptr).total;
      m.data()[i] = orig;
      const double gfd = (plus - minus) / (2.0 * eps);
      const double ga = grads[k]->data()[i];
      const double rel = std::abs(ga - gfd) / std::max({std::abs(ga), std::abs(gfd), 1e-8});
      ++result.entries_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = names[k];
        result.worst_index = static_cast<std::size_t>(i);
      }
    }
  }
  return result;
}

}  // namespace fearec::training
