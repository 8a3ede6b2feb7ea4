#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "fearec/run_config.hpp"

namespace fearec {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: invalid value '" + v + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: invalid boolean '" + v + "' for " + key + " (expected true or false)");
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Field {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define FEAREC_INT(key, member) \
  Field{key, [](RunConfig& c, const std::string& v) { c.member = parse_number<int>(key, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define FEAREC_DOUBLE(key, member) \
  Field{key, [](RunConfig& c, const std::string& v) { c.member = parse_number<double>(key, v); }, \
        [](const RunConfig& c) { return fmt(c.member); }}
#define FEAREC_BOOL(key, member) \
  Field{key, [](RunConfig& c, const std::string& v) { c.member = parse_bool(key, v); }, \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"dataset", [](RunConfig& c, const std::string& v) { c.dataset = v; },
            [](const RunConfig& c) { return c.dataset.string(); }},
      Field{"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
            [](const RunConfig& c) { return c.out_dir.string(); }},
      Field{"seed",
            [](RunConfig& c, const std::string& v) {
              c.seed = parse_number<std::uint64_t>("seed", v);
              c.seed_set = true;
            },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      FEAREC_INT("num_items", model.num_items),
      FEAREC_INT("max_len", model.max_len),
      FEAREC_INT("dim", model.dim),
      FEAREC_INT("num_layers", model.num_layers),
      FEAREC_INT("num_heads", model.num_heads),
      FEAREC_DOUBLE("alpha", model.alpha),
      FEAREC_DOUBLE("gamma", model.gamma),
      FEAREC_DOUBLE("topk_scale", model.topk_scale),
      FEAREC_DOUBLE("dropout", model.dropout),
      FEAREC_BOOL("causal_mask", model.causal_mask),
      FEAREC_DOUBLE("learning_rate", train.learning_rate),
      FEAREC_INT("batch_size", train.batch_size),
      FEAREC_INT("epochs", train.epochs),
      FEAREC_DOUBLE("adam_beta1", train.adam_beta1),
      FEAREC_DOUBLE("adam_beta2", train.adam_beta2),
      FEAREC_DOUBLE("adam_eps", train.adam_eps),
      FEAREC_DOUBLE("cl_temperature", train.cl_temperature),
      FEAREC_INT("patience", train.patience),
      FEAREC_BOOL("prefix_augmentation", train.prefix_augmentation),
      FEAREC_DOUBLE("lambda1", weights.lambda1),
      FEAREC_DOUBLE("lambda2", weights.lambda2),
      FEAREC_BOOL("exclude_seen", exclude_seen),
  };
  return table;
}

#undef FEAREC_INT
#undef FEAREC_DOUBLE
#undef FEAREC_BOOL

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.name) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.name) + " = " + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.name);
  return out;
}

void RunConfig::validate_for_training() const {
  if (!seed_set) throw ConfigError("config: seed is required for training (set seed or pass --seed)");
  if (dataset.empty()) throw ConfigError("config: dataset path is required");
  if (!std::filesystem::exists(dataset)) throw ConfigError("config: dataset not found: " + dataset.string());
  try {
    ModelConfig probe = model;
    if (probe.num_items == 0) probe.num_items = 1;
    probe.validate();
    train.validate();
    training::validate(weights);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (weights.lambda1 > 0.0 && train.batch_size < 2) {
    throw ConfigError("config: batch_size must be >= 2 when lambda1 > 0 (in-batch negatives)");
  }
}

void apply_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  apply_text(cfg, buf.str(), path.string());
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  cfg.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace fearec
