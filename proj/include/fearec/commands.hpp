#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "fearec/checks.hpp"
#include "fearec/data.hpp"
#include "fearec/eval.hpp"
#include "fearec/run_config.hpp"

namespace fearec::commands {

// Parses a raw log, builds the dataset, saves it and prints its statistics.
data::DatasetStats cmd_prepare(const std::filesystem::path& raw, const std::filesystem::path& out,
                               data::LogFormat format, int min_count, std::ostream& log);

struct TrainSummary {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_ndcg10 = -1.0;
};

// Writes into cfg.out_dir: config.txt (effective configuration), train.log,
// valid_epoch{e}.json, best.ckpt (highest valid NDCG@10) and last.ckpt.
TrainSummary cmd_train(const RunConfig& cfg, std::ostream& log);

eval::EvalReport cmd_evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                              const std::string& split, const std::filesystem::path& report_path,
                              bool exclude_seen, std::ostream& log);

// `user` is a raw user id or a dense index in [0, users).
void cmd_inspect(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                 const std::string& user, const std::filesystem::path& out_dir, std::ostream& log);

// Returns the number of failed suites.
int cmd_check(checks::Fault fault, std::ostream& log);

}  // namespace fearec::commands
