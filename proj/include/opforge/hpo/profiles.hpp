#pragma once

#include <filesystem>
#include <string>

#include "opforge/model.hpp"

namespace opforge::hpo {

// A stored configuration: {"training": {...}, "architecture": {...}} with
// disjoint key sets.
struct Profile {
  json training = json::object();
  json architecture = json::object();

  json merged() const;
  json to_json() const { return {{"training", training}, {"architecture", architecture}}; }
  // ProfileIntegrityError on overlapping keys or a missing section.
  static Profile from_json(const json& j);
};

// Keys read by the trainer and dataset builders; everything else belongs to
// the architecture.
bool is_training_key(const std::string& key);
Profile split_config(const json& merged);

Profile load_profile(const std::filesystem::path& file);
void save_profile(const Profile& p, const std::filesystem::path& file);

// $OPFORGE_PROFILE_DIR if set, else the profiles/ directory of the source tree.
std::filesystem::path profile_dir();

// profiles/<family>/<example>/<mode>.json; LookupError when absent.
Profile load_default_hyperparameters(const std::string& family, const std::string& example,
                                     const std::string& mode, const std::filesystem::path& dir = profile_dir());

}  // namespace opforge::hpo
