#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fearec/commands.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct Common {
  std::string config;
  std::string seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value configuration file");
  cmd->add_option("--seed", c.seed, "random seed (overrides the config file)");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--set", c.overrides, "key=value override, repeatable");
}

fearec::RunConfig resolve(const Common& c) {
  fearec::RunConfig cfg = c.config.empty() ? fearec::RunConfig{} : fearec::load_run_config(c.config);
  for (const auto& o : c.overrides) fearec::apply_override(cfg, o);
  if (!c.seed.empty()) cfg.set("seed", c.seed);
  if (!c.out.empty()) cfg.set("out_dir", c.out);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FEARec sequential recommender: data preparation, training, evaluation and diagnostics"};
  app.require_subcommand(1);

  Common prep_c, train_c, eval_c, insp_c;

  auto* prepare = app.add_subcommand("prepare", "build a processed dataset from a raw interaction log");
  std::string raw, format = "tsv", prepared;
  int min_count = 5;
  prepare->add_option("--input", raw, "raw interaction log")->required();
  prepare->add_option("--format", format, "tsv or csv")->check(CLI::IsMember({"tsv", "csv"}));
  prepare->add_option("--min-count", min_count, "k-core threshold for users and items");
  prepare->add_option("--output", prepared, "processed dataset path (default <out>/dataset.json)");
  add_common(prepare, prep_c);

  auto* train = app.add_subcommand("train", "train a model and write checkpoints and logs");
  add_common(train, train_c);

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the valid or test split");
  std::string ckpt, dataset, split = "test", report_path;
  bool include_seen = false;
  evaluate->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  evaluate->add_option("--dataset", dataset, "processed dataset (default: dataset key of the config)");
  evaluate->add_option("--split", split, "valid or test")->check(CLI::IsMember({"valid", "test"}));
  evaluate->add_option("--report", report_path, "report path (default <out>/eval_<split>.json)");
  evaluate->add_flag("--include-seen", include_seen, "rank items already in the input sequence too");
  add_common(evaluate, eval_c);

  auto* inspect = app.add_subcommand("inspect", "export attention and delay weights for one user");
  std::string insp_ckpt, insp_dataset, user;
  inspect->add_option("--checkpoint", insp_ckpt, "checkpoint file")->required();
  inspect->add_option("--dataset", insp_dataset, "processed dataset (default: dataset key of the config)");
  inspect->add_option("--user", user, "raw user id or dense user index")->required();
  add_common(inspect, insp_c);

  auto* check = app.add_subcommand("check", "run the property suites");
  std::string fault = "none";
  check->add_option("--inject-fault", fault, "none or fft-sign")->check(CLI::IsMember({"none", "fft-sign"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*prepare) {
      const auto cfg = resolve(prep_c);
      const std::filesystem::path out = prepared.empty() ? cfg.out_dir / "dataset.json" : std::filesystem::path(prepared);
      fearec::commands::cmd_prepare(raw, out, fearec::data::parse_format(format), min_count, std::cout);
      std::cout << "wrote " << out.string() << '\n';
    } else if (*train) {
      const auto cfg = resolve(train_c);
      const auto s = fearec::commands::cmd_train(cfg, std::cout);
      std::cout << "best epoch " << s.best_epoch << " valid NDCG@10 " << s.best_ndcg10 << '\n';
    } else if (*evaluate) {
      const auto cfg = resolve(eval_c);
      const std::filesystem::path ds = dataset.empty() ? cfg.dataset : std::filesystem::path(dataset);
      const std::filesystem::path rp =
          report_path.empty() ? cfg.out_dir / ("eval_" + split + ".json") : std::filesystem::path(report_path);
      fearec::commands::cmd_evaluate(ckpt, ds, split, rp, cfg.exclude_seen && !include_seen, std::cout);
    } else if (*inspect) {
      const auto cfg = resolve(insp_c);
      const std::filesystem::path ds = insp_dataset.empty() ? cfg.dataset : std::filesystem::path(insp_dataset);
      fearec::commands::cmd_inspect(insp_ckpt, ds, user, cfg.out_dir / "attention", std::cout);
    } else if (*check) {
      return fearec::commands::cmd_check(fearec::checks::parse_fault(fault), std::cout) == 0 ? kOk : kFailure;
    }
  } catch (const fearec::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const fearec::data::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
