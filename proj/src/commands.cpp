#include <charconv>
#include <cstdio>
#include <fstream>

#include "fearec/checkpoint.hpp"
#include "fearec/commands.hpp"
#include "fearec/rng.hpp"
#include "fearec/training.hpp"

namespace fearec::commands {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Checkpoint load_compatible(const std::filesystem::path& checkpoint, const data::SequenceDataset& ds) {
  if (!std::filesystem::exists(checkpoint)) throw data::DataError("checkpoint not found: " + checkpoint.string());
  Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.config.num_items != ds.num_items()) {
    throw data::DataError("vocabulary mismatch: checkpoint has " + std::to_string(ck.config.num_items) +
                          " items, dataset has " + std::to_string(ds.num_items()));
  }
  return ck;
}

}  // namespace

data::DatasetStats cmd_prepare(const std::filesystem::path& raw, const std::filesystem::path& out,
                               data::LogFormat format, int min_count, std::ostream& log) {
  if (!std::filesystem::exists(raw)) throw data::DataError("input not found: " + raw.string());
  const auto ds = data::build_dataset(data::load_interactions(raw, format), min_count);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  data::save_dataset(out, ds);
  const auto s = data::dataset_stats(ds);
  char buf[256];
  std::snprintf(buf, sizeof buf, "users    %zu\nitems    %zu\nactions  %zu\navg_len  %.2f\nsparsity %.2f%%\n",
                s.users, s.items, s.actions, s.avg_length, 100.0 * s.sparsity);
  log << buf;
  return s;
}

TrainSummary cmd_train(const RunConfig& input, std::ostream& log) {
  input.validate_for_training();
  RunConfig cfg = input;
  const auto ds = data::load_dataset(cfg.dataset);
  if (cfg.model.num_items != 0 && cfg.model.num_items != ds.num_items()) {
    throw ConfigError("vocabulary mismatch: config num_items=" + std::to_string(cfg.model.num_items) +
                      " but dataset has " + std::to_string(ds.num_items()) + " items");
  }
  cfg.model.num_items = ds.num_items();
  cfg.train.seed = cfg.seed;
  cfg.model.validate();

  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "config.txt", cfg.to_text());

  const auto examples = data::training_examples(ds, cfg.model.max_len, cfg.train.prefix_augmentation);
  const auto index = data::build_semantic_index(examples);
  ModelParams params = ModelParams::initialize(cfg.model, derive_seed(cfg.seed, {0x696e6974ULL}));
  training::Adam adam(params, cfg.train);

  std::ofstream train_log(cfg.out_dir / "train.log");
  if (!train_log) throw std::runtime_error("cannot write " + (cfg.out_dir / "train.log").string());
  TrainSummary summary;
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    const auto stats = training::train_epoch(cfg.model, params, adam, examples, index, cfg.weights, cfg.train, epoch);
    const std::string line = training::format_log_line(stats);
    train_log << line << '\n' << std::flush;
    const auto report = eval::evaluate(cfg.model, params, ds, "valid", {cfg.exclude_seen});
    eval::write_report(cfg.out_dir / ("valid_epoch" + std::to_string(epoch) + ".json"), report);
    char buf[96];
    std::snprintf(buf, sizeof buf, " valid_HR@10=%.4f valid_NDCG@10=%.4f", report.hr10, report.ndcg10);
    log << line << buf << '\n';
    summary.epochs_run = epoch;
    if (report.ndcg10 > summary.best_ndcg10) {
      summary.best_ndcg10 = report.ndcg10;
      summary.best_epoch = epoch;
      save_checkpoint(cfg.out_dir / "best.ckpt", cfg.model, params);
      stale = 0;
    } else if (cfg.train.patience > 0 && ++stale >= cfg.train.patience) {
      log << "early stop: no valid NDCG@10 improvement for " << stale << " epochs\n";
      break;
    }
  }
  save_checkpoint(cfg.out_dir / "last.ckpt", cfg.model, params);
  if (summary.best_epoch == 0) save_checkpoint(cfg.out_dir / "best.ckpt", cfg.model, params);
  return summary;
}

eval::EvalReport cmd_evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                              const std::string& split, const std::filesystem::path& report_path,
                              bool exclude_seen, std::ostream& log) {
  const auto ds = data::load_dataset(dataset);
  const Checkpoint ck = load_compatible(checkpoint, ds);
  const auto report = eval::evaluate(ck.config, ck.params, ds, split, {exclude_seen});
  if (report_path.has_parent_path()) std::filesystem::create_directories(report_path.parent_path());
  eval::write_report(report_path, report);
  char buf[160];
  std::snprintf(buf, sizeof buf, "HR@5 %.4f\nHR@10 %.4f\nNDCG@5 %.4f\nNDCG@10 %.4f\n", report.hr5, report.hr10,
                report.ndcg5, report.ndcg10);
  log << buf;
  return report;
}

void cmd_inspect(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                 const std::string& user, const std::filesystem::path& out_dir, std::ostream& log) {
  const auto ds = data::load_dataset(dataset);
  const Checkpoint ck = load_compatible(checkpoint, ds);
  const auto users = ds.user_index();
  std::size_t u = ds.num_users();
  if (const auto it = users.find(user); it != users.end()) {
    u = it->second;
  } else {
    std::size_t idx = 0;
    const auto [ptr, ec] = std::from_chars(user.data(), user.data() + user.size(), idx);
    if (ec == std::errc() && ptr == user.data() + user.size() && idx < ds.num_users()) u = idx;
  }
  if (u >= ds.num_users()) {
    throw data::DataError("unknown user '" + user + "' (valid dense ids 0.." + std::to_string(ds.num_users() - 1) + ")");
  }
  const auto ids = data::pad_truncate(ds.split_input(u, "test"), ck.config.max_len);
  for (const auto& p : eval::export_attention(ck.config, ck.params, ids, out_dir)) log << p.string() << '\n';
}

int cmd_check(checks::Fault fault, std::ostream& log) {
  int failed = 0;
  for (const auto& r : checks::run_all(fault)) {
    log << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
    if (!r.passed) ++failed;
  }
  log << (failed ? std::to_string(failed) + " suite(s) failed" : std::string("all suites passed")) << '\n';
  return failed;
}

}  // namespace fearec::commands
