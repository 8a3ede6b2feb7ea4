#pragma once

#include <span>
#include <vector>

#include "fearec/autodiff.hpp"
#include "fearec/model.hpp"
#include "fearec/ramp.hpp"
#include "fearec/rng.hpp"

namespace fearec::encoder {

inline constexpr double kLayerNormEps = 1e-12;

// Frozen FDA lag sets, indexed [layer][head].
using LagPlan = std::vector<std::vector<std::vector<int>>>;

struct LayerTrace {
  ramp::Band band;
  std::vector<Matrix> attention;                     // per head, [N x N] TDA softmax weights
  std::vector<std::vector<ad::DelayChoice>> delays;  // per head, chosen (lag, weight)
};

struct ForwardOptions {
  bool train = false;
  Rng* rng = nullptr;                    // dropout stream; required when train && dropout > 0
  const LagPlan* frozen_lags = nullptr;  // replay lag choices instead of selecting top-k
  bool keep_attention = false;           // copy TDA weight matrices into the trace
};

// Parameters plus an optional gradient sink of identical shape.
struct Model {
  const ModelConfig& cfg;
  const ModelParams& params;
  ModelParams* grads = nullptr;
};

// Band-filtered projections shared by both attention branches of a block.
struct FilteredProjections {
  ad::Var q;
  ad::Var k;
  ad::Var v;
};

struct Encoded {
  ad::Var hidden;  // [N x D]
  std::vector<bool> valid;
  std::vector<LayerTrace> layers;

  LagPlan lag_plan() const;
};

std::vector<bool> valid_positions(std::span<const int> ids);

// Dropout(LayerNorm(item + pos)) with padded rows zeroed.
ad::Var embed_sequence(ad::Tape& tape, const Model& model, std::span<const int> ids, const ForwardOptions& opt);

// Q, K, V projections, each band-filtered column-wise along time.
FilteredProjections project(ad::Tape& tape, const Model& model, std::size_t layer, ad::Var h,
                            const ramp::Band& band);

// Multi-head scaled dot-product attention on filtered projections, then Wo.
ad::Var time_domain_attention(ad::Tape& tape, const Model& model, std::size_t layer,
                              const FilteredProjections& qkv, const std::vector<bool>& valid,
                              LayerTrace* trace, bool keep_attention);

// Multi-head auto-correlation attention with time-delay aggregation, then Wo.
ad::Var frequency_domain_attention(ad::Tape& tape, const Model& model, std::size_t layer,
                                   const FilteredProjections& qkv, const ramp::Band& band,
                                   const std::vector<std::vector<int>>* frozen, LayerTrace* trace);

// LayerNorm(H + mix + Dropout(FFN(mix))), mix = gamma TDA + (1 - gamma) FDA.
ad::Var fea_block(ad::Tape& tape, const Model& model, std::size_t layer, ad::Var h, const ramp::Band& band,
                  const std::vector<bool>& valid, const ForwardOptions& opt, LayerTrace* trace);

Encoded encode(ad::Tape& tape, const Model& model, std::span<const int> ids, const ForwardOptions& opt);

// Index of the last non-padding position (N - 1 under left padding).
Eigen::Index readout_position(const std::vector<bool>& valid);

// Logits over the catalog from the readout row; padding id scored -inf.
ad::Var predict_scores(ad::Tape& tape, const Model& model, const Encoded& enc);

// Inference helpers: dropout off, no gradients.
Matrix encode_eval(const ModelConfig& cfg, const ModelParams& params, std::span<const int> ids,
                   std::vector<LayerTrace>* traces = nullptr, bool keep_attention = false);
std::vector<double> score_items(const ModelConfig& cfg, const ModelParams& params, std::span<const int> ids);

}  // namespace fearec::encoder
