#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace fearec::data {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Interaction {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
};

using InteractionLog = std::vector<Interaction>;

enum class LogFormat { tsv, csv };
LogFormat parse_format(const std::string& name);

// tsv: user<TAB>item<TAB>timestamp per line, no header.
// csv: header row naming user, item and timestamp columns (aliases user_id,
// item_id, time, ts accepted), then one record per row.
// Every malformed line is reported, with its 1-based line number, in one DataError.
InteractionLog load_interactions(const std::filesystem::path& path, LogFormat format);

struct UserSplit {
  std::vector<int> train;
  int valid = 0;
  int test = 0;
};

struct SequenceDataset {
  std::vector<std::string> users;  // dense user index -> raw id
  std::vector<std::string> items;  // dense item id - 1 -> raw id
  std::vector<std::vector<int>> sequences;  // chronological dense item ids

  std::size_t num_users() const { return users.size(); }
  int num_items() const { return static_cast<int>(items.size()); }

  // Leave-one-out: last item is test, second to last is valid.
  UserSplit split(std::size_t user) const;
  // Input prefix and target for the given split ("valid" or "test").
  std::vector<int> split_input(std::size_t user, const std::string& split_name) const;
  int split_target(std::size_t user, const std::string& split_name) const;

  std::map<std::string, std::size_t> user_index() const;
  std::map<std::string, int> item_index() const;
};

// Minimum sequence length that leave-one-out can split.
inline constexpr std::size_t kMinSequenceLength = 3;

// Stable per-user chronological order, iterative k-core until no user has
// fewer than min_count interactions and no item is used by fewer than
// min_count users, then dense ids in order of first appearance.
SequenceDataset build_dataset(const InteractionLog& log, int min_count = 5);

// Most recent n items, left padded with 0.
std::vector<int> pad_truncate(const std::vector<int>& seq, int n);

struct TrainingExample {
  std::size_t user = 0;
  std::vector<int> ids;  // padded input [N]
  int target = 0;
};

// Default: one example per user, the training prefix minus its last item
// predicting that item. With prefix_augmentation every prefix of the
// training part predicts its next item.
std::vector<TrainingExample> training_examples(const SequenceDataset& ds, int max_len,
                                               bool prefix_augmentation = false);

// target item -> indices of examples with that target.
using SemanticIndex = std::map<int, std::vector<std::size_t>>;
SemanticIndex build_semantic_index(const std::vector<TrainingExample>& examples);

struct Batch {
  std::vector<std::size_t> examples;
  std::vector<std::size_t> positives;  // semantic positive partner per example
};

// Deterministic shuffle keyed by (seed, epoch). A trailing batch of one is
// merged into the previous batch so in-batch negatives always exist.
std::vector<Batch> make_batches(const std::vector<TrainingExample>& examples, const SemanticIndex& index,
                                int batch_size, std::uint64_t seed, std::uint64_t epoch);

// Each user repeats a random motif of `period` distinct items out to N + 2.
SequenceDataset synthetic_periodic(int num_users, int num_items, int period, int max_len, std::uint64_t seed);
// Items drawn uniformly with replacement.
SequenceDataset synthetic_random(int num_users, int num_items, int length, std::uint64_t seed);

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t actions = 0;
  double avg_length = 0.0;
  double sparsity = 0.0;
};
DatasetStats dataset_stats(const SequenceDataset& ds);

void save_dataset(const std::filesystem::path& path, const SequenceDataset& ds);
SequenceDataset load_dataset(const std::filesystem::path& path);

}  // namespace fearec::data
