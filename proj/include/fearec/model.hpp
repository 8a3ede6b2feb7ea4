#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fearec/linalg.hpp"

namespace fearec {

struct ModelConfig {
  int num_items = 0;  // |I|, padding id 0 excluded
  int max_len = 50;   // N
  int dim = 64;       // D
  int num_layers = 2; // L
  int num_heads = 2;  // h
  double alpha = 0.8;      // ramp sampling ratio
  double gamma = 0.5;      // weight of time-domain attention in the hybrid mix
  double topk_scale = 1.0; // m in k = floor(m ln N)
  double dropout = 0.5;
  bool causal_mask = true;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  int head_dim() const { return dim / num_heads; }
  int top_k() const;
  std::size_t spectrum_length() const;  // floor(N/2)+1

  bool operator==(const ModelConfig&) const = default;
};

struct LayerNormParams {
  Matrix gamma;  // [1 x D]
  Matrix beta;   // [1 x D]
};

struct FeaLayerParams {
  Matrix wq, wk, wv, wo;  // [D x D]
  Matrix ffn_w1, ffn_w2;  // [D x D]
  Matrix ffn_b1, ffn_b2;  // [1 x D]
  LayerNormParams norm;
};

// All learnable tensors. Gradients use the same type.
struct ModelParams {
  Matrix item_table;  // [(|I|+1) x D], row 0 is padding and stays zero
  Matrix pos_table;   // [N x D]
  LayerNormParams emb_norm;
  std::vector<FeaLayerParams> layers;

  static ModelParams initialize(const ModelConfig& cfg, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& other);

  // Canonical names: item_table, pos_table, emb_norm.gamma, emb_norm.beta,
  // layer{l}.Wq/.Wk/.Wv/.Wo/.ffn_W1/.ffn_b1/.ffn_W2/.ffn_b2/.norm.gamma/.norm.beta
  // with l counted from 1. Visiting order is fixed.
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  void set_zero();
  void add(const ModelParams& other);
  std::size_t parameter_count() const;
};

}  // namespace fearec
