#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "fearec/encoder.hpp"
#include "fearec/eval.hpp"

using namespace fearec;
using namespace fearec::eval;

namespace {

ModelConfig small_config(int items) {
  ModelConfig cfg;
  cfg.num_items = items;
  cfg.max_len = 10;
  cfg.dim = 8;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  return cfg;
}

double brute_ndcg(const std::vector<std::size_t>& ranks, std::size_t n) {
  double s = 0.0;
  for (std::size_t r : ranks) {
    if (r <= n) s += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return s / static_cast<double>(ranks.size());
}

}  // namespace

TEST_CASE("rank counts ties against the target and skips padding") {
  const std::vector<double> logits = {100.0, 0.5, 2.0, 0.5, -1.0};
  CHECK(rank_of_target(logits, 2) == 1);
  CHECK(rank_of_target(logits, 1) == 3);
  CHECK(rank_of_target(logits, 3) == 3);
  CHECK(rank_of_target(logits, 4) == 4);
  CHECK_THROWS(rank_of_target(logits, 0));
  CHECK_THROWS(rank_of_target(logits, 5));
}

TEST_CASE("metrics match direct formulas") {
  const std::vector<std::size_t> ranks = {1, 2, 5, 6, 11, 3};
  const TopN at5 = metrics_from_ranks(ranks, 5);
  CHECK(at5.hr == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
  CHECK(at5.ndcg == doctest::Approx(brute_ndcg(ranks, 5)).epsilon(1e-12));
  const TopN at10 = metrics_from_ranks(ranks, 10);
  CHECK(at10.hr == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(at5.hr <= at10.hr);
  CHECK(at5.ndcg <= at10.ndcg);
  CHECK(at5.ndcg <= at5.hr);
  const std::vector<std::size_t> top = {1, 1};
  CHECK(metrics_from_ranks(top, 5).ndcg == doctest::Approx(1.0));
  const std::vector<std::size_t> none;
  CHECK_THROWS(metrics_from_ranks(none, 5));
}

TEST_CASE("metric monotonicity over random ranks") {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::size_t> dist(1, 30);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> ranks(20);
    for (auto& r : ranks) r = dist(gen);
    const TopN a = metrics_from_ranks(ranks, 5);
    const TopN b = metrics_from_ranks(ranks, 10);
    CHECK(a.hr <= b.hr);
    CHECK(a.ndcg <= b.ndcg);
    CHECK(a.ndcg <= a.hr);
    CHECK(b.ndcg <= b.hr);
  }
}

TEST_CASE("evaluate agrees with per-user scoring") {
  const auto ds = data::synthetic_random(12, 15, 7, 4);
  const ModelConfig cfg = small_config(15);
  const ModelParams params = ModelParams::initialize(cfg, 2);
  const EvalReport rep = evaluate(cfg, params, ds, "test", {false});
  CHECK(rep.num_users == 12);
  REQUIRE(rep.ranks.size() == 12);
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto ids = data::pad_truncate(ds.split_input(u, "test"), cfg.max_len);
    const auto logits = encoder::score_items(cfg, params, ids);
    CHECK(rep.ranks[u] == rank_of_target(logits, ds.split_target(u, "test")));
  }
  const EvalReport again = evaluate(cfg, params, ds, "test", {false});
  CHECK(again.ranks == rep.ranks);
  CHECK(again.to_json() == rep.to_json());
}

TEST_CASE("seen-item exclusion never hurts the target") {
  const auto ds = data::synthetic_random(20, 10, 8, 9);
  const ModelConfig cfg = small_config(10);
  const ModelParams params = ModelParams::initialize(cfg, 5);
  const EvalReport with = evaluate(cfg, params, ds, "valid", {true});
  const EvalReport without = evaluate(cfg, params, ds, "valid", {false});
  for (std::size_t u = 0; u < ds.num_users(); ++u) CHECK(with.ranks[u] <= without.ranks[u]);
}

TEST_CASE("report json uses the metric names") {
  EvalReport rep;
  rep.split = "test";
  rep.num_users = 3;
  rep.hr5 = 0.5;
  rep.ranks = {1, 7, 2};
  const auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j.at("split") == "test");
  CHECK(j.at("num_users") == 3);
  CHECK(j.at("HR@5") == 0.5);
  CHECK(j.contains("HR@10"));
  CHECK(j.contains("NDCG@5"));
  CHECK(j.contains("NDCG@10"));
  CHECK(rep.hit_rate(1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("vocabulary mismatch is rejected") {
  const auto ds = data::synthetic_random(5, 12, 6, 1);
  const ModelConfig cfg = small_config(11);
  const ModelParams params = ModelParams::initialize(cfg, 1);
  CHECK_THROWS_WITH_AS(evaluate(cfg, params, ds, "test"), doctest::Contains("vocabulary mismatch"),
                       std::invalid_argument);
}

TEST_CASE("attention export writes one file per head and kind") {
  const ModelConfig cfg = small_config(15);
  const ModelParams params = ModelParams::initialize(cfg, 3);
  const std::vector<int> ids = {0, 0, 0, 4, 5, 6, 4, 5, 6, 4};
  const auto dir = std::filesystem::temp_directory_path() / "fearec_test_attention";
  std::filesystem::remove_all(dir);
  const auto paths = export_attention(cfg, params, ids, dir);
  CHECK(paths.size() == 4);
  std::ifstream tda(dir / "layer1_tda_head1.csv");
  REQUIRE(tda);
  int rows = 0;
  for (std::string line; std::getline(tda, line);) {
    ++rows;
    double sum = 0.0;
    int cols = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t next = std::min(line.find(',', pos), line.size());
      sum += std::stod(line.substr(pos, next - pos));
      ++cols;
      pos = next + 1;
    }
    CHECK(cols == cfg.max_len);
    if (rows > 3) CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(rows == cfg.max_len);
  std::ifstream fda(dir / "layer1_fda_head2.csv");
  REQUIRE(fda);
  std::string header;
  std::getline(fda, header);
  CHECK(header == "lag,weight");
  int lags = 0;
  double mass = 0.0;
  for (std::string line; std::getline(fda, line);) {
    ++lags;
    mass += std::stod(line.substr(line.find(',') + 1));
  }
  CHECK(lags == cfg.top_k());
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
}
