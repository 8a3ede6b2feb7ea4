#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "fearec/encoder.hpp"
#include "fearec/eval.hpp"
#include "fearec/parallel.hpp"

namespace fearec::eval {

std::size_t rank_of_target(std::span<const double> logits, int target) {
  if (target < 1 || static_cast<std::size_t>(target) >= logits.size()) {
    throw std::invalid_argument("rank_of_target: target " + std::to_string(target) + " out of range");
  }
  const double t = logits[static_cast<std::size_t>(target)];
  std::size_t rank = 1;
  for (std::size_t j = 1; j < logits.size(); ++j) {
    if (j != static_cast<std::size_t>(target) && logits[j] >= t) ++rank;
  }
  return rank;
}

TopN metrics_from_ranks(std::span<const std::size_t> ranks, std::size_t n) {
  if (ranks.empty()) throw std::invalid_argument("metrics_from_ranks: no ranks");
  TopN m;
  for (std::size_t r : ranks) {
    if (r < 1) throw std::invalid_argument("metrics_from_ranks: ranks are 1-based");
    if (r <= n) {
      m.hr += 1.0;
      m.ndcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  m.hr /= static_cast<double>(ranks.size());
  m.ndcg /= static_cast<double>(ranks.size());
  return m;
}

double EvalReport::hit_rate(std::size_t n) const { return metrics_from_ranks(ranks, n).hr; }

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["split"] = split;
  j["num_users"] = num_users;
  j["HR@5"] = hr5;
  j["HR@10"] = hr10;
  j["NDCG@5"] = ndcg5;
  j["NDCG@10"] = ndcg10;
  return j.dump(2);
}

EvalReport evaluate(const ModelConfig& cfg, const ModelParams& params, const data::SequenceDataset& ds,
                    const std::string& split, const EvalOptions& opt) {
  if (split != "valid" && split != "test") throw std::invalid_argument("unknown split '" + split + "'");
  if (ds.num_users() == 0) throw std::invalid_argument("evaluate: empty split");
  if (ds.num_items() != cfg.num_items) {
    throw std::invalid_argument("vocabulary mismatch: dataset has " + std::to_string(ds.num_items()) +
                                " items, model expects " + std::to_string(cfg.num_items));
  }
  EvalReport report;
  report.split = split;
  report.num_users = ds.num_users();
  report.ranks.assign(ds.num_users(), 0);
  parallel_for(ds.num_users(), [&](std::size_t u) {
    const std::vector<int> input = ds.split_input(u, split);
    const int target = ds.split_target(u, split);
    std::vector<double> logits = encoder::score_items(cfg, params, data::pad_truncate(input, cfg.max_len));
    if (opt.exclude_seen) {
      for (int id : input) {
        if (id != target) logits[static_cast<std::size_t>(id)] = -std::numeric_limits<double>::infinity();
      }
    }
    report.ranks[u] = rank_of_target(logits, target);
  });
  const TopN at5 = metrics_from_ranks(report.ranks, 5);
  const TopN at10 = metrics_from_ranks(report.ranks, 10);
  report.hr5 = at5.hr;
  report.ndcg5 = at5.ndcg;
  report.hr10 = at10.hr;
  report.ndcg10 = at10.ndcg;
  return report;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << report.to_json() << '\n';
}

std::vector<std::filesystem::path> export_attention(const ModelConfig& cfg, const ModelParams& params,
                                                    std::span<const int> ids, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::vector<encoder::LayerTrace> traces;
  encoder::encode_eval(cfg, params, ids, &traces, true);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::string& name) {
    written.push_back(dir / name);
    std::ofstream out(written.back());
    if (!out) throw std::runtime_error("cannot write " + written.back().string());
    return out;
  };
  char buf[64];
  for (std::size_t l = 0; l < traces.size(); ++l) {
    const auto& tr = traces[l];
    for (std::size_t h = 0; h < tr.attention.size(); ++h) {
      auto out = open("layer" + std::to_string(l + 1) + "_tda_head" + std::to_string(h + 1) + ".csv");
      const Matrix& a = tr.attention[h];
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
          std::snprintf(buf, sizeof buf, "%.17g", a(i, j));
          out << (j ? "," : "") << buf;
        }
        out << '\n';
      }
    }
    for (std::size_t h = 0; h < tr.delays.size(); ++h) {
      auto out = open("layer" + std::to_string(l + 1) + "_fda_head" + std::to_string(h + 1) + ".csv");
      out << "lag,weight\n";
      for (const auto& d : tr.delays[h]) {
        std::snprintf(buf, sizeof buf, "%.17g", d.weight);
        out << d.lag << ',' << buf << '\n';
      }
    }
  }
  return written;
}

}  // namespace fearec::eval
