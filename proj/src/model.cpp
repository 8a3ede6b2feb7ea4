#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "fearec/model.hpp"
#include "fearec/rng.hpp"
#include "fearec/spectral.hpp"

namespace fearec {
namespace {

constexpr double kInitStd = 0.02;

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * kInitStd;
  return m;
}

LayerNormParams unit_norm(int dim) {
  return {Matrix::Ones(1, dim), Matrix::Zero(1, dim)};
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (num_items < 1) fail("num_items must be >= 1");
  if (max_len < 2) fail("max_len must be >= 2");
  if (dim < 1) fail("dim must be >= 1");
  if (num_layers < 1) fail("num_layers must be >= 1");
  if (num_heads < 1) fail("num_heads must be >= 1");
  if (dim % num_heads != 0) {
    fail("dim (" + std::to_string(dim) + ") must be divisible by num_heads (" + std::to_string(num_heads) + ")");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha must lie in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (!(topk_scale > 0.0) || !std::isfinite(topk_scale)) fail("topk_scale must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
}

int ModelConfig::top_k() const {
  const int k = static_cast<int>(std::floor(topk_scale * std::log(static_cast<double>(max_len))));
  return std::clamp(k, 1, max_len);
}

std::size_t ModelConfig::spectrum_length() const {
  return spectral::half_length(static_cast<std::size_t>(max_len));
}

ModelParams ModelParams::initialize(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const int d = cfg.dim;
  ModelParams p;
  p.item_table = normal_matrix(cfg.num_items + 1, d, rng);
  p.item_table.row(0).setZero();
  p.pos_table = normal_matrix(cfg.max_len, d, rng);
  p.emb_norm = unit_norm(d);
  for (int l = 0; l < cfg.num_layers; ++l) {
    FeaLayerParams layer;
    layer.wq = normal_matrix(d, d, rng);
    layer.wk = normal_matrix(d, d, rng);
    layer.wv = normal_matrix(d, d, rng);
    layer.wo = normal_matrix(d, d, rng);
    layer.ffn_w1 = normal_matrix(d, d, rng);
    layer.ffn_b1 = Matrix::Zero(1, d);
    layer.ffn_w2 = normal_matrix(d, d, rng);
    layer.ffn_b2 = Matrix::Zero(1, d);
    layer.norm = unit_norm(d);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams z = other;
  z.set_zero();
  return z;
}

void ModelParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("item_table", item_table);
  fn("pos_table", pos_table);
  fn("emb_norm.gamma", emb_norm.gamma);
  fn("emb_norm.beta", emb_norm.beta);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i + 1) + ".";
    FeaLayerParams& l = layers[i];
    fn(prefix + "Wq", l.wq);
    fn(prefix + "Wk", l.wk);
    fn(prefix + "Wv", l.wv);
    fn(prefix + "Wo", l.wo);
    fn(prefix + "ffn_W1", l.ffn_w1);
    fn(prefix + "ffn_b1", l.ffn_b1);
    fn(prefix + "ffn_W2", l.ffn_w2);
    fn(prefix + "ffn_b2", l.ffn_b2);
    fn(prefix + "norm.gamma", l.norm.gamma);
    fn(prefix + "norm.beta", l.norm.beta);
  }
}

void ModelParams::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each(
      [&fn](const std::string& name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
}

void ModelParams::set_zero() {
  for_each([](const std::string&, Matrix& m) { m.setZero(); });
}

void ModelParams::add(const ModelParams& other) {
  std::vector<const Matrix*> src;
  other.for_each([&src](const std::string&, const Matrix& m) { src.push_back(&m); });
  std::size_t i = 0;
  for_each([&](const std::string& name, Matrix& m) {
    if (i >= src.size() || src[i]->rows() != m.rows() || src[i]->cols() != m.cols()) {
      throw std::invalid_argument("parameter shape mismatch at " + name);
    }
    m += *src[i++];
  });
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&n](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

}  // namespace fearec
