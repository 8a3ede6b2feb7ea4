#include <cmath>
#include <stdexcept>
#include <string>

#include "fearec/encoder.hpp"

namespace fearec::encoder {
namespace {

ad::ParamRef ref(const Matrix& value, Matrix* grad) { return {&value, grad}; }

struct LayerRefs {
  ad::ParamRef wq, wk, wv, wo, w1, b1, w2, b2, gamma, beta;
};

LayerRefs layer_refs(const Model& model, std::size_t layer) {
  const FeaLayerParams& p = model.params.layers.at(layer);
  FeaLayerParams* g = model.grads ? &model.grads->layers.at(layer) : nullptr;
  auto r = [g](const Matrix& v, Matrix FeaLayerParams::*field) { return ref(v, g ? &(g->*field) : nullptr); };
  LayerRefs out;
  out.wq = r(p.wq, &FeaLayerParams::wq);
  out.wk = r(p.wk, &FeaLayerParams::wk);
  out.wv = r(p.wv, &FeaLayerParams::wv);
  out.wo = r(p.wo, &FeaLayerParams::wo);
  out.w1 = r(p.ffn_w1, &FeaLayerParams::ffn_w1);
  out.b1 = r(p.ffn_b1, &FeaLayerParams::ffn_b1);
  out.w2 = r(p.ffn_w2, &FeaLayerParams::ffn_w2);
  out.b2 = r(p.ffn_b2, &FeaLayerParams::ffn_b2);
  out.gamma = ref(p.norm.gamma, g ? &g->norm.gamma : nullptr);
  out.beta = ref(p.norm.beta, g ? &g->norm.beta : nullptr);
  return out;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

ad::Var maybe_dropout(ad::Tape& tape, ad::Var x, const Model& model, const ForwardOptions& opt) {
  const double p = model.cfg.dropout;
  if (!opt.train || p <= 0.0) return x;
  if (!opt.rng) throw std::invalid_argument("dropout requires an rng stream in train mode");
  return ad::dropout(tape, x, dropout_mask(x->value.rows(), x->value.cols(), p, *opt.rng));
}

std::vector<ad::Var> split_heads(ad::Tape& tape, ad::Var x, int heads) {
  const Eigen::Index width = x->value.cols() / heads;
  std::vector<ad::Var> out;
  for (int h = 0; h < heads; ++h) out.push_back(ad::slice_columns(tape, x, h * width, width));
  return out;
}

}  // namespace

LagPlan Encoded::lag_plan() const {
  LagPlan plan;
  for (const auto& layer : layers) {
    auto& heads = plan.emplace_back();
    for (const auto& delays : layer.delays) {
      auto& lags = heads.emplace_back();
      for (const auto& d : delays) lags.push_back(d.lag);
    }
  }
  return plan;
}

std::vector<bool> valid_positions(std::span<const int> ids) {
  std::vector<bool> v(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) v[i] = ids[i] != 0;
  return v;
}

ad::Var embed_sequence(ad::Tape& tape, const Model& model, std::span<const int> ids, const ForwardOptions& opt) {
  const auto n = static_cast<std::size_t>(model.cfg.max_len);
  if (ids.size() != n) {
    throw std::invalid_argument("embed_sequence: expected " + std::to_string(n) + " ids, got " +
                                std::to_string(ids.size()));
  }
  for (int id : ids) {
    if (id < 0 || id > model.cfg.num_items) throw std::out_of_range("embed_sequence: item id " + std::to_string(id) + " out of range");
  }
  ModelParams* g = model.grads;
  ad::Var e = ad::embed(tape, ids, ref(model.params.item_table, g ? &g->item_table : nullptr),
                        ref(model.params.pos_table, g ? &g->pos_table : nullptr));
  e = ad::layer_norm(tape, e, ref(model.params.emb_norm.gamma, g ? &g->emb_norm.gamma : nullptr),
                     ref(model.params.emb_norm.beta, g ? &g->emb_norm.beta : nullptr), kLayerNormEps);
  e = maybe_dropout(tape, e, model, opt);
  return ad::mask_rows(tape, e, valid_positions(ids));
}

FilteredProjections project(ad::Tape& tape, const Model& model, std::size_t layer, ad::Var h,
                            const ramp::Band& band) {
  const LayerRefs r = layer_refs(model, layer);
  return {ad::band_filter(tape, ad::matmul(tape, h, r.wq), band),
          ad::band_filter(tape, ad::matmul(tape, h, r.wk), band),
          ad::band_filter(tape, ad::matmul(tape, h, r.wv), band)};
}

ad::Var time_domain_attention(ad::Tape& tape, const Model& model, std::size_t layer,
                              const FilteredProjections& qkv, const std::vector<bool>& valid,
                              LayerTrace* trace, bool keep_attention) {
  const auto n = static_cast<Eigen::Index>(valid.size());
  if (qkv.q->value.rows() != n) throw std::invalid_argument("time_domain_attention: shape mismatch");
  Matrix allowed = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool causal_ok = !model.cfg.causal_mask || j <= i;
      allowed(i, j) = valid[static_cast<std::size_t>(j)] && causal_ok ? 1.0 : 0.0;
    }
  }
  const int heads = model.cfg.num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.cfg.head_dim()));
  const auto qs = split_heads(tape, qkv.q, heads);
  const auto ks = split_heads(tape, qkv.k, heads);
  const auto vs = split_heads(tape, qkv.v, heads);
  std::vector<ad::Var> outs;
  for (int h = 0; h < heads; ++h) {
    Matrix weights;
    outs.push_back(ad::attention_head(tape, qs[static_cast<std::size_t>(h)], ks[static_cast<std::size_t>(h)],
                                      vs[static_cast<std::size_t>(h)], allowed, scale,
                                      trace && keep_attention ? &weights : nullptr));
    if (trace && keep_attention) trace->attention.push_back(std::move(weights));
  }
  return ad::matmul(tape, ad::concat_columns(tape, outs), layer_refs(model, layer).wo);
}

ad::Var frequency_domain_attention(ad::Tape& tape, const Model& model, std::size_t layer,
                                   const FilteredProjections& qkv, const ramp::Band& band,
                                   const std::vector<std::vector<int>>* frozen, LayerTrace* trace) {
  const int heads = model.cfg.num_heads;
  const auto qs = split_heads(tape, qkv.q, heads);
  const auto ks = split_heads(tape, qkv.k, heads);
  const auto vs = split_heads(tape, qkv.v, heads);
  std::vector<ad::Var> outs;
  for (int h = 0; h < heads; ++h) {
    const auto hi = static_cast<std::size_t>(h);
    std::span<const int> lags;
    if (frozen) lags = frozen->at(hi);
    std::vector<ad::DelayChoice> report;
    outs.push_back(ad::delay_aggregate(tape, qs[hi], ks[hi], vs[hi], band, model.cfg.top_k(), lags, &report));
    if (trace) trace->delays.push_back(std::move(report));
  }
  return ad::matmul(tape, ad::concat_columns(tape, outs), layer_refs(model, layer).wo);
}

ad::Var fea_block(ad::Tape& tape, const Model& model, std::size_t layer, ad::Var h, const ramp::Band& band,
                  const std::vector<bool>& valid, const ForwardOptions& opt, LayerTrace* trace) {
  const LayerRefs r = layer_refs(model, layer);
  const FilteredProjections qkv = project(tape, model, layer, h, band);
  const std::vector<std::vector<int>>* frozen = opt.frozen_lags ? &opt.frozen_lags->at(layer) : nullptr;

  const double gamma = model.cfg.gamma;
  const ad::Var tda = time_domain_attention(tape, model, layer, qkv, valid, trace, opt.keep_attention);
  const ad::Var fda = frequency_domain_attention(tape, model, layer, qkv, band, frozen, trace);
  const ad::Var mixed = ad::axpby(tape, gamma, tda, 1.0 - gamma, fda);

  ad::Var ffn = ad::gelu(tape, ad::add_row_bias(tape, ad::matmul(tape, mixed, r.w1), r.b1));
  ffn = ad::add_row_bias(tape, ad::matmul(tape, ffn, r.w2), r.b2);
  ffn = maybe_dropout(tape, ffn, model, opt);

  const ad::Var sum = ad::add(tape, ad::add(tape, h, mixed), ffn);
  const ad::Var out = ad::layer_norm(tape, sum, r.gamma, r.beta, kLayerNormEps);
  return ad::mask_rows(tape, out, valid);
}

Encoded encode(ad::Tape& tape, const Model& model, std::span<const int> ids, const ForwardOptions& opt) {
  const ModelConfig& cfg = model.cfg;
  if (model.params.layers.size() != static_cast<std::size_t>(cfg.num_layers)) {
    throw std::invalid_argument("encode: parameter layer count does not match config");
  }
  Encoded enc;
  enc.valid = valid_positions(ids);
  enc.hidden = embed_sequence(tape, model, ids, opt);
  const ramp::RampSchedule schedule(static_cast<std::size_t>(cfg.num_layers), cfg.spectrum_length(), cfg.alpha);
  for (std::size_t l = 0; l < static_cast<std::size_t>(cfg.num_layers); ++l) {
    LayerTrace trace;
    trace.band = schedule.band_for_layer(l + 1);
    enc.hidden = fea_block(tape, model, l, enc.hidden, trace.band, enc.valid, opt, &trace);
    enc.layers.push_back(std::move(trace));
  }
  return enc;
}

Eigen::Index readout_position(const std::vector<bool>& valid) {
  for (std::size_t i = valid.size(); i-- > 0;) {
    if (valid[i]) return static_cast<Eigen::Index>(i);
  }
  return static_cast<Eigen::Index>(valid.size()) - 1;
}

ad::Var predict_scores(ad::Tape& tape, const Model& model, const Encoded& enc) {
  const ad::Var last = ad::select_row(tape, enc.hidden, readout_position(enc.valid));
  return ad::item_logits(tape, last, ref(model.params.item_table, model.grads ? &model.grads->item_table : nullptr));
}

Matrix encode_eval(const ModelConfig& cfg, const ModelParams& params, std::span<const int> ids,
                   std::vector<LayerTrace>* traces, bool keep_attention) {
  ad::Tape tape(false);
  ForwardOptions opt;
  opt.keep_attention = keep_attention;
  Encoded enc = encode(tape, {cfg, params, nullptr}, ids, opt);
  if (traces) *traces = std::move(enc.layers);
  return enc.hidden->value;
}

std::vector<double> score_items(const ModelConfig& cfg, const ModelParams& params, std::span<const int> ids) {
  ad::Tape tape(false);
  const Model model{cfg, params, nullptr};
  const Encoded enc = encode(tape, model, ids, {});
  const ad::Var logits = predict_scores(tape, model, enc);
  return {logits->value.data(), logits->value.data() + logits->value.size()};
}

}  // namespace fearec::encoder
