#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "fearec/checkpoint.hpp"

namespace fearec {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'F', 'E', 'A', 'R', 'E', 'C', 'K', '1'};

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::string read_bytes(std::istream& is, std::uint32_t n) {
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

std::string config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["num_items"] = cfg.num_items;
  j["max_len"] = cfg.max_len;
  j["dim"] = cfg.dim;
  j["num_layers"] = cfg.num_layers;
  j["num_heads"] = cfg.num_heads;
  j["alpha"] = cfg.alpha;
  j["gamma"] = cfg.gamma;
  j["topk_scale"] = cfg.topk_scale;
  j["dropout"] = cfg.dropout;
  j["causal_mask"] = cfg.causal_mask;
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig cfg;
  cfg.num_items = j.at("num_items").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.dim = j.at("dim").get<int>();
  cfg.num_layers = j.at("num_layers").get<int>();
  cfg.num_heads = j.at("num_heads").get<int>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.topk_scale = j.at("topk_scale").get<double>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.causal_mask = j.at("causal_mask").get<bool>();
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  const std::string cfg_json = config_to_json(cfg);
  write_u32(os, static_cast<std::uint32_t>(cfg_json.size()));
  os.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));

  std::uint32_t count = 0;
  params.for_each([&count](const std::string&, const Matrix&) { ++count; });
  write_u32(os, count);
  std::vector<float> buf;
  params.for_each([&](const std::string& name, const Matrix& m) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(m.rows()));
    write_u32(os, static_cast<std::uint32_t>(m.cols()));
    buf.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  });
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  Checkpoint ck;
  ck.config = config_from_json(read_bytes(is, read_u32(is)));
  ck.params = ModelParams::initialize(ck.config, 0);

  const std::uint32_t count = read_u32(is);
  std::uint32_t seen = 0;
  std::vector<float> buf;
  ck.params.for_each([&](const std::string& name, Matrix& m) {
    if (seen++ >= count) throw std::runtime_error("checkpoint: missing tensor " + name);
    const std::string stored = read_bytes(is, read_u32(is));
    if (stored != name) throw std::runtime_error("checkpoint: expected tensor " + name + ", found " + stored);
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    if (rows != m.rows() || cols != m.cols()) throw std::runtime_error("checkpoint: shape mismatch for " + name);
    buf.resize(static_cast<std::size_t>(rows) * cols);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)))) {
      throw std::runtime_error("checkpoint: truncated tensor " + name);
    }
    for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = static_cast<double>(buf[i]);
  });
  if (seen != count) throw std::runtime_error("checkpoint: unexpected extra tensors");
  return ck;
}

}  // namespace fearec
