#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fearec/data.hpp"
#include "fearec/model.hpp"

namespace fearec::eval {

// 1 + number of non-padding items other than the target whose logit is >= the
// target's. Ties count against the target.
std::size_t rank_of_target(std::span<const double> logits, int target);

struct TopN {
  double hr = 0.0;
  double ndcg = 0.0;
};
TopN metrics_from_ranks(std::span<const std::size_t> ranks, std::size_t n);

struct EvalReport {
  std::string split;
  std::size_t num_users = 0;
  double hr5 = 0.0, hr10 = 0.0, ndcg5 = 0.0, ndcg10 = 0.0;
  std::vector<std::size_t> ranks;  // per user, dataset order

  // {"split", "num_users", "HR@5", "HR@10", "NDCG@5", "NDCG@10"}
  std::string to_json() const;
  double hit_rate(std::size_t n) const;
};

struct EvalOptions {
  // Drop items already present in the user's input prefix (except the target) from the ranking.
  bool exclude_seen = true;
};

EvalReport evaluate(const ModelConfig& cfg, const ModelParams& params, const data::SequenceDataset& ds,
                    const std::string& split, const EvalOptions& opt = {});

void write_report(const std::filesystem::path& path, const EvalReport& report);

// Per layer l (1-based):
//   layer{l}_tda_head{h}.csv  N rows of N comma-separated attention weights
//   layer{l}_fda_head{h}.csv  header "lag,weight", then one row per selected lag
// Returns the written paths.
std::vector<std::filesystem::path> export_attention(const ModelConfig& cfg, const ModelParams& params,
                                                    std::span<const int> ids, const std::filesystem::path& dir);

}  // namespace fearec::eval
