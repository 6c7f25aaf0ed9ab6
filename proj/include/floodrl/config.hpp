#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "floodrl/bayesopt.hpp"
#include "floodrl/ppo.hpp"
#include "floodrl/world.hpp"

namespace floodrl {

/// Every tunable of the command-line tools. Defaults here; a JSON file
/// overrides them and flags override the file. Sections and keys mirror the
/// struct fields (see README for the full schema).
struct AppConfig {
  std::optional<std::filesystem::path> worldDir; // world.dir; synthesized when absent
  SynthOptions world;                            // world.zones / trips / seed
  EnvConfig env;                                 // env.*
  PpoConfig ppo;                                 // ppo.*
  BoConfig bo;                                   // bo.*
  int boEvalSeeds = 3;                           // bo.evalSeeds
  int evalSeeds = 10;                            // eval.seeds

  AppConfig();
  void validate() const;
};

/// Full config as JSON, keys sorted.
nlohmann::json config_to_json(const AppConfig& c);
/// Applies a (possibly partial) JSON overlay. Unknown sections or keys and
/// wrongly typed values are Config errors.
void apply_config_json(AppConfig& c, const nlohmann::json& overlay);
AppConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON dump, as 16 hex digits. Independent of the
/// key order of the source file.
std::string config_hash(const AppConfig& c);

} // namespace floodrl
