#include "opforge/hpo/profiles.hpp"

#include <array>
#include <cstdlib>
#include <fstream>

#include "opforge/error.hpp"

namespace opforge::hpo {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 11> kTrainingKeys = {
    "learning_rate", "weight_decay",  "scheduler_gamma", "scheduler_step", "batch_size",  "epochs",
    "retrain",       "training_samples", "val_samples",  "test_samples",   "normalize"};

}  // namespace

bool is_training_key(const std::string& key) {
  for (const char* k : kTrainingKeys)
    if (key == k) return true;
  return false;
}

json Profile::merged() const {
  json m = training;
  for (const auto& [k, v] : architecture.items()) {
    if (m.contains(k)) throw ProfileIntegrityError("key '" + k + "' appears in both training and architecture");
    m[k] = v;
  }
  return m;
}

Profile Profile::from_json(const json& j) {
  if (!j.is_object() || !j.contains("training") || !j.contains("architecture"))
    throw ProfileIntegrityError("profile needs 'training' and 'architecture' sections");
  Profile p;
  p.training = j.at("training");
  p.architecture = j.at("architecture");
  if (!p.training.is_object() || !p.architecture.is_object())
    throw ProfileIntegrityError("profile sections must be objects");
  p.merged();
  return p;
}

Profile split_config(const json& merged) {
  Profile p;
  for (const auto& [k, v] : merged.items()) (is_training_key(k) ? p.training : p.architecture)[k] = v;
  return p;
}

Profile load_profile(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw LookupError("no profile at " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("profile " + file.string() + " is not valid JSON: " + e.what());
  }
  return Profile::from_json(j);
}

void save_profile(const Profile& p, const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << p.to_json().dump(2) << '\n';
}

fs::path profile_dir() {
  if (const char* env = std::getenv("OPFORGE_PROFILE_DIR"); env && *env) return env;
  return OPFORGE_PROFILE_DIR;
}

Profile load_default_hyperparameters(const std::string& family, const std::string& example, const std::string& mode,
                                     const fs::path& dir) {
  fs::path file = dir / family / example / (mode + ".json");
  if (!fs::exists(file)) {
    if (!fs::exists(dir / family)) throw LookupError("unknown model family '" + family + "'");
    if (!fs::exists(dir / family / example)) throw LookupError("no profiles for example '" + example + "'");
    throw LookupError("example '" + example + "' has no '" + mode + "' profile");
  }
  return load_profile(file);
}

}  // namespace opforge::hpo
