#include "opforge/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "opforge/cno.hpp"
#include "opforge/error.hpp"
#include "opforge/fno.hpp"

namespace opforge {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

std::size_t layout_count(const ParamLayout& layout) {
  std::size_t n = 0;
  for (const auto& [name, shape] : layout) n += numel(shape);
  return n;
}

std::size_t count_params_exact(const Model& model) {
  std::size_t n = 0;
  for (const auto& p : model.parameters()) n += p.value.size();
  return n;
}

Tensor Initializer::kaiming(const Shape& shape, std::size_t fan_in) {
  return normal(shape, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

Tensor Initializer::normal(const Shape& shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng_);
  return Tensor::from(shape, std::move(v), true);
}

Tensor Initializer::zeros(const Shape& shape) { return Tensor::zeros(shape, true); }

void write_f64(const fs::path& file, const std::vector<double>& values) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw IoError("short write to " + file.string());
}

std::vector<double> read_f64(const fs::path& file) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot read " + file.string());
  auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(double)) throw DataError(file.string() + " is not a whole number of float64 values");
  std::vector<double> v(bytes / sizeof(double));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read from " + file.string());
  return v;
}

void write_text_atomic(const fs::path& file, const std::string& text) {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, file);
}

void save_checkpoint(const Model& model, const fs::path& dir, const json& extra) {
  fs::create_directories(dir);
  json index = json::array();
  std::vector<double> blob;
  for (const auto& p : model.parameters()) {
    index.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", blob.size()}, {"count", p.value.size()}});
    blob.insert(blob.end(), p.value.values().begin(), p.value.values().end());
  }
  json manifest = {{"format", "opforge-checkpoint"}, {"version", 1},         {"family", model.family()},
                   {"config", model.config()},        {"tensors", index},     {"dtype", "float64-le"}};
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
  fs::path tmp = dir / "weights.bin.tmp";
  write_f64(tmp, blob);
  fs::rename(tmp, dir / "weights.bin");
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw NotFoundError("no checkpoint manifest in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint manifest " + dir.string() + ": " + e.what());
  }
  auto blob = read_f64(dir / "weights.bin");
  auto model = build_model(manifest.at("family").get<std::string>(), manifest.at("config"), 0);
  auto params = model->parameters();
  const auto& index = manifest.at("tensors");
  if (index.size() != params.size()) throw DataError("checkpoint tensor count does not match the architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = index[i];
    auto& p = params[i];
    if (entry.at("name").get<std::string>() != p.name || entry.at("shape").get<Shape>() != p.value.shape())
      throw DataError("checkpoint tensor " + entry.at("name").get<std::string>() + " does not match " + p.name);
    auto off = entry.at("offset").get<std::size_t>(), count = entry.at("count").get<std::size_t>();
    if (off + count > blob.size()) throw DataError("checkpoint blob is truncated");
    std::memcpy(p.value.values_mut().data(), blob.data() + off, count * sizeof(double));
  }
  return {std::move(model), std::move(manifest)};
}

std::unique_ptr<Model> build_model(const std::string& family, const json& config, std::uint64_t seed) {
  if (family == "fno") return std::make_unique<FnoModel>(FnoConfig::from_json(config), seed);
  if (family == "cno") return std::make_unique<CnoModel>(CnoConfig::from_json(config), seed);
  throw ConfigError("unknown architecture family '" + family + "'");
}

}  // namespace opforge
