#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fearec/data.hpp"
#include "fearec/encoder.hpp"
#include "fearec/losses.hpp"
#include "fearec/model.hpp"

namespace fearec::training {

using losses::LossWeights;

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double cl_temperature = 1.0;
  int patience = 0;  // epochs without valid NDCG@10 improvement before stopping; 0 disables
  bool prefix_augmentation = false;

  void validate() const;
};

void validate(const LossWeights& w);

struct LossBreakdown {
  double rec = 0.0;
  double cl = 0.0;
  double freg = 0.0;
  double total = 0.0;
};

// Batch rows: padded inputs, targets and the padded semantic positives.
struct SequenceBatch {
  std::vector<std::vector<int>> ids;
  std::vector<int> targets;
  std::vector<std::vector<int>> positive_ids;

  std::size_t size() const { return ids.size(); }
};

SequenceBatch materialize(const std::vector<data::TrainingExample>& examples, const data::Batch& batch);

// Readout rows of the three passes per example: the recommendation pass, the
// second dropout pass and the semantic positive's pass.
struct StepViews {
  Matrix first_pass;
  Matrix second_pass;
  Matrix positive;
};

struct GradientOptions {
  double rec_weight = 1.0;
  double cl_temperature = 1.0;
  // Lag sets per (example, pass) at index 3 * example + pass.
  std::vector<encoder::LagPlan>* record_lags = nullptr;
  const std::vector<encoder::LagPlan>* replay_lags = nullptr;
  StepViews* views = nullptr;
};

// Loss of one batch and, when grads is non-null, its gradient. The rec term
// and the freg term are averaged over the batch. Dropout masks come from
// streams derived from (stream_seed, example, pass), so the result does not
// depend on the number of worker threads.
LossBreakdown batch_loss(const ModelConfig& cfg, const ModelParams& params, const SequenceBatch& batch,
                         const LossWeights& w, std::uint64_t stream_seed, const GradientOptions& opt,
                         ModelParams* grads);

class Adam {
 public:
  Adam(const ModelParams& like, const TrainConfig& cfg);
  void step(ModelParams& params, const ModelParams& grads);
  std::int64_t steps() const { return t_; }

 private:
  TrainConfig cfg_;
  ModelParams m_;
  ModelParams v_;
  std::int64_t t_ = 0;
};

// Throws std::runtime_error naming the first parameter with a non-finite gradient.
void check_finite(const ModelParams& grads);

// One optimizer step: batch_loss with gradients, finiteness guard, Adam
// update, then the padding embedding row is zeroed.
LossBreakdown train_step(const ModelConfig& cfg, ModelParams& params, Adam& adam, const SequenceBatch& batch,
                         const LossWeights& w, const TrainConfig& tcfg, std::uint64_t step_seed,
                         StepViews* views = nullptr);

struct EpochStats {
  int epoch = 0;
  LossBreakdown loss;  // mean over batches
  double wall_seconds = 0.0;
};

EpochStats train_epoch(const ModelConfig& cfg, ModelParams& params, Adam& adam,
                       const std::vector<data::TrainingExample>& examples, const data::SemanticIndex& index,
                       const LossWeights& w, const TrainConfig& tcfg, int epoch);

// "epoch=3 rec_loss=... cl_loss=... freg_loss=... total=... wall_seconds=..."
std::string format_log_line(const EpochStats& s);

enum class GradCheckLoss { rec, freg, total };
GradCheckLoss parse_grad_check_loss(const std::string& name);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

// Central differences (epsilon 1e-4) over every parameter entry of a tiny
// model (N = 8, D = 8, L = 1, h = 2, dropout off, lag sets frozen from a
// first pass). Relative error is |ga - gfd| / max(|ga|, |gfd|, 1e-8).
GradCheckResult grad_check(GradCheckLoss which, std::uint64_t seed = 7);

}  // namespace fearec::training
