#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "fearec/data.hpp"
#include "fearec/rng.hpp"

namespace fearec::data {
namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

bool parse_int64(const std::string& s, std::int64_t& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

int column_of(const std::vector<std::string>& header, std::initializer_list<const char*> names) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string h = header[i];
    std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const char* n : names) {
      if (h == n) return static_cast<int>(i);
    }
  }
  return -1;
}

std::vector<int> prefix(const std::vector<int>& seq, std::size_t n) { return {seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(n)}; }

}  // namespace

LogFormat parse_format(const std::string& name) {
  if (name == "tsv") return LogFormat::tsv;
  if (name == "csv") return LogFormat::csv;
  throw DataError("unknown log format '" + name + "' (expected tsv or csv)");
}

InteractionLog load_interactions(const std::filesystem::path& path, LogFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  const char sep = format == LogFormat::tsv ? '\t' : ',';
  InteractionLog log;
  std::vector<std::string> problems;
  std::string line;
  std::size_t line_no = 0;
  int cu = 0, ci = 1, ct = 2;
  bool header_pending = format == LogFormat::csv;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, sep);
    if (header_pending) {
      header_pending = false;
      cu = column_of(fields, {"user", "user_id", "userid"});
      ci = column_of(fields, {"item", "item_id", "itemid"});
      ct = column_of(fields, {"timestamp", "time", "ts"});
      if (cu < 0 || ci < 0 || ct < 0) {
        if (fields.size() != 3) throw DataError(path.string() + ": line 1: csv header must name user, item and timestamp columns");
        cu = 0, ci = 1, ct = 2;
      }
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max({cu, ci, ct})) + 1;
    if (fields.size() < need || (format == LogFormat::tsv && fields.size() != 3)) {
      problems.push_back("line " + std::to_string(line_no) + ": expected 3 fields, got " + std::to_string(fields.size()));
      continue;
    }
    Interaction rec{fields[static_cast<std::size_t>(cu)], fields[static_cast<std::size_t>(ci)], 0};
    const std::string& ts = fields[static_cast<std::size_t>(ct)];
    if (!parse_int64(ts, rec.timestamp)) {
      problems.push_back("line " + std::to_string(line_no) + ": unparseable timestamp '" + ts + "'");
      continue;
    }
    if (rec.user.empty() || rec.item.empty()) {
      problems.push_back("line " + std::to_string(line_no) + ": empty user or item");
      continue;
    }
    log.push_back(std::move(rec));
  }
  if (!problems.empty()) {
    std::string msg = path.string() + ": " + std::to_string(problems.size()) + " malformed line(s)";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  return log;
}

UserSplit SequenceDataset::split(std::size_t user) const {
  const auto& seq = sequences.at(user);
  if (seq.size() < kMinSequenceLength) throw DataError("user " + users.at(user) + " has too few items to split");
  return {prefix(seq, seq.size() - 2), seq[seq.size() - 2], seq.back()};
}

std::vector<int> SequenceDataset::split_input(std::size_t user, const std::string& split_name) const {
  const auto& seq = sequences.at(user);
  if (split_name == "valid") return prefix(seq, seq.size() - 2);
  if (split_name == "test") return prefix(seq, seq.size() - 1);
  throw DataError("unknown split '" + split_name + "' (expected valid or test)");
}

int SequenceDataset::split_target(std::size_t user, const std::string& split_name) const {
  const UserSplit s = split(user);
  if (split_name == "valid") return s.valid;
  if (split_name == "test") return s.test;
  throw DataError("unknown split '" + split_name + "' (expected valid or test)");
}

std::map<std::string, std::size_t> SequenceDataset::user_index() const {
  std::map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < users.size(); ++i) m.emplace(users[i], i);
  return m;
}

std::map<std::string, int> SequenceDataset::item_index() const {
  std::map<std::string, int> m;
  for (std::size_t i = 0; i < items.size(); ++i) m.emplace(items[i], static_cast<int>(i) + 1);
  return m;
}

SequenceDataset build_dataset(const InteractionLog& log, int min_count) {
  if (log.empty()) throw DataError("empty interaction log");
  if (min_count < 1) throw DataError("min_count must be >= 1");
  const auto k = static_cast<std::size_t>(min_count);

  // Group by user in order of first appearance, then stable sort by time.
  std::vector<std::string> user_names;
  std::unordered_map<std::string, std::size_t> user_slot;
  std::vector<std::vector<const Interaction*>> per_user;
  for (const auto& rec : log) {
    auto [it, fresh] = user_slot.emplace(rec.user, user_names.size());
    if (fresh) {
      user_names.push_back(rec.user);
      per_user.emplace_back();
    }
    per_user[it->second].push_back(&rec);
  }
  for (auto& seq : per_user) {
    std::stable_sort(seq.begin(), seq.end(),
                     [](const Interaction* a, const Interaction* b) { return a->timestamp < b->timestamp; });
  }

  std::vector<bool> user_alive(per_user.size(), true);
  std::set<std::string> dead_items;
  for (bool changed = true; changed;) {
    changed = false;
    std::unordered_map<std::string, std::set<std::size_t>> item_users;
    for (std::size_t u = 0; u < per_user.size(); ++u) {
      if (!user_alive[u]) continue;
      std::erase_if(per_user[u], [&](const Interaction* r) { return dead_items.count(r->item) > 0; });
      if (per_user[u].size() < std::max(k, kMinSequenceLength)) {
        user_alive[u] = false;
        changed = true;
        continue;
      }
      for (const auto* r : per_user[u]) item_users[r->item].insert(u);
    }
    for (const auto& [item, us] : item_users) {
      if (us.size() < k) {
        dead_items.insert(item);
        changed = true;
      }
    }
  }

  SequenceDataset ds;
  std::unordered_map<std::string, int> item_id;
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    if (!user_alive[u]) continue;
    ds.users.push_back(user_names[u]);
    auto& seq = ds.sequences.emplace_back();
    for (const auto* r : per_user[u]) {
      auto [it, fresh] = item_id.emplace(r->item, static_cast<int>(ds.items.size()) + 1);
      if (fresh) ds.items.push_back(r->item);
      seq.push_back(it->second);
    }
  }
  if (ds.users.empty()) throw DataError("dataset empty after k-core");
  return ds;
}

std::vector<int> pad_truncate(const std::vector<int>& seq, int n) {
  if (n < 1) throw DataError("pad_truncate: length must be >= 1");
  const auto len = static_cast<std::size_t>(n);
  std::vector<int> out(len, 0);
  const std::size_t take = std::min(len, seq.size());
  std::copy(seq.end() - static_cast<std::ptrdiff_t>(take), seq.end(), out.end() - static_cast<std::ptrdiff_t>(take));
  return out;
}

std::vector<TrainingExample> training_examples(const SequenceDataset& ds, int max_len, bool prefix_augmentation) {
  std::vector<TrainingExample> out;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const std::vector<int> train = ds.split(u).train;
    const std::size_t first = prefix_augmentation ? 1 : train.size() - 1;
    for (std::size_t t = std::max<std::size_t>(first, 1); t < train.size(); ++t) {
      out.push_back({u, pad_truncate(prefix(train, t), max_len), train[t]});
    }
  }
  return out;
}

SemanticIndex build_semantic_index(const std::vector<TrainingExample>& examples) {
  SemanticIndex index;
  for (std::size_t i = 0; i < examples.size(); ++i) index[examples[i].target].push_back(i);
  return index;
}

std::vector<Batch> make_batches(const std::vector<TrainingExample>& examples, const SemanticIndex& index,
                                int batch_size, std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1) throw DataError("batch_size must be >= 1");
  Rng rng(derive_seed(seed, {epoch, 0x62617463ULL}));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<Batch> batches;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t begin = 0; begin < order.size(); begin += bs) {
    Batch b;
    b.examples.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                      order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), begin + bs)));
    batches.push_back(std::move(b));
  }
  if (batches.size() >= 2 && batches.back().examples.size() == 1) {
    batches[batches.size() - 2].examples.push_back(batches.back().examples.front());
    batches.pop_back();
  }
  for (auto& b : batches) {
    for (std::size_t e : b.examples) {
      const auto it = index.find(examples[e].target);
      std::size_t partner = e;
      if (it != index.end() && it->second.size() > 1) {
        // Uniform over the other examples sharing the target.
        std::size_t pick = rng.below(it->second.size() - 1);
        for (std::size_t cand : it->second) {
          if (cand == e) continue;
          if (pick-- == 0) {
            partner = cand;
            break;
          }
        }
      }
      b.positives.push_back(partner);
    }
  }
  return batches;
}

SequenceDataset synthetic_periodic(int num_users, int num_items, int period, int max_len, std::uint64_t seed) {
  if (period < 2 || period > max_len / 2) throw DataError("synthetic_periodic: period must satisfy 2 <= period <= N/2");
  if (num_items < period) throw DataError("synthetic_periodic: need at least `period` items");
  if (num_users < 1) throw DataError("synthetic_periodic: need at least one user");
  Rng rng(derive_seed(seed, {0x706572ULL}));
  SequenceDataset ds;
  for (int i = 1; i <= num_items; ++i) ds.items.push_back("i" + std::to_string(i));
  std::vector<int> pool(static_cast<std::size_t>(num_items));
  std::iota(pool.begin(), pool.end(), 1);
  for (int u = 0; u < num_users; ++u) {
    ds.users.push_back("u" + std::to_string(u));
    for (int j = 0; j < period; ++j) std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(j) + rng.below(static_cast<std::uint64_t>(num_items - j))]);
    auto& seq = ds.sequences.emplace_back();
    for (int t = 0; t < max_len + 2; ++t) seq.push_back(pool[static_cast<std::size_t>(t % period)]);
  }
  return ds;
}

SequenceDataset synthetic_random(int num_users, int num_items, int length, std::uint64_t seed) {
  if (num_items < 1 || num_users < 1) throw DataError("synthetic_random: need users and items");
  if (length < static_cast<int>(kMinSequenceLength)) throw DataError("synthetic_random: length must be >= 3");
  Rng rng(derive_seed(seed, {0x726e64ULL}));
  SequenceDataset ds;
  for (int i = 1; i <= num_items; ++i) ds.items.push_back("i" + std::to_string(i));
  for (int u = 0; u < num_users; ++u) {
    ds.users.push_back("u" + std::to_string(u));
    auto& seq = ds.sequences.emplace_back();
    for (int t = 0; t < length; ++t) seq.push_back(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(num_items))));
  }
  return ds;
}

DatasetStats dataset_stats(const SequenceDataset& ds) {
  DatasetStats s;
  s.users = ds.num_users();
  s.items = ds.items.size();
  for (const auto& seq : ds.sequences) s.actions += seq.size();
  if (s.users > 0) s.avg_length = static_cast<double>(s.actions) / static_cast<double>(s.users);
  if (s.users > 0 && s.items > 0) {
    s.sparsity = 1.0 - static_cast<double>(s.actions) / (static_cast<double>(s.users) * static_cast<double>(s.items));
  }
  return s;
}

void save_dataset(const std::filesystem::path& path, const SequenceDataset& ds) {
  nlohmann::ordered_json j;
  j["format"] = "fearec-dataset-1";
  j["users"] = ds.users;
  j["items"] = ds.items;
  j["sequences"] = ds.sequences;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

SequenceDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  SequenceDataset ds;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.value("format", "") != "fearec-dataset-1") throw DataError(path.string() + ": not a processed dataset");
    ds.users = j.at("users").get<std::vector<std::string>>();
    ds.items = j.at("items").get<std::vector<std::string>>();
    ds.sequences = j.at("sequences").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (ds.sequences.size() != ds.users.size()) throw DataError(path.string() + ": user/sequence count mismatch");
  for (const auto& seq : ds.sequences) {
    if (seq.size() < kMinSequenceLength) throw DataError(path.string() + ": sequence shorter than 3");
    for (int id : seq) {
      if (id < 1 || id > ds.num_items()) throw DataError(path.string() + ": item id out of range");
    }
  }
  return ds;
}

}  // namespace fearec::data
