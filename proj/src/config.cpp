#include "floodrl/config.hpp"

#include <functional>
#include <map>

namespace floodrl {

namespace {

using json = nlohmann::json;
using Setter = std::function<void(const json&)>;

template <class T>
Setter bind(T& target) {
  return [&target](const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw json::type_error::create(302, "expected a boolean", &v);
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw json::type_error::create(302, "expected an integer", &v);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw json::type_error::create(302, "expected a number", &v);
    }
    target = v.get<T>();
  };
}

std::map<std::string, std::map<std::string, Setter>> setters(AppConfig& c) {
  std::map<std::string, std::map<std::string, Setter>> s;
  s["world"] = {{"zones", bind(c.world.zones)},
                {"trips", bind(c.world.trips)},
                {"seed", bind(c.world.seed)},
                {"dir", [&c](const json& v) {
                   if (v.is_null()) {
                     c.worldDir.reset();
                   } else {
                     if (!v.is_string()) throw json::type_error::create(302, "expected a string or null", &v);
                     c.worldDir = v.get<std::string>();
                   }
                 }}};
  s["env"] = {{"scenario", [&c](const json& v) {
                 if (!v.is_string()) throw json::type_error::create(302, "expected a string", &v);
                 c.env.scenario = scenario_or_throw(v.get<std::string>());
               }},
              {"startYear", bind(c.env.startYear)},
              {"endYear", bind(c.env.endYear)},
              {"gamma", bind(c.env.gamma)},
              {"seed", bind(c.env.seed)},
              {"rewardScale", bind(c.env.rewardScale)}};
  PpoConfig& p = c.ppo;
  s["ppo"] = {{"batchSize", bind(p.batchSize)},
              {"stepsPerUpdate", bind(p.stepsPerUpdate)},
              {"epochs", bind(p.epochs)},
              {"entropyCoef", bind(p.entropyCoef)},
              {"klLimit", bind(p.klLimit)},
              {"clip", bind(p.clip)},
              {"gaeLambda", bind(p.gaeLambda)},
              {"gamma", bind(p.gamma)},
              {"parallelEnvs", bind(p.parallelEnvs)},
              {"maxSteps", bind(p.maxSteps)},
              {"learningRate", bind(p.learningRate)},
              {"annealLearningRate", bind(p.annealLearningRate)},
              {"valueCoef", bind(p.valueCoef)},
              {"maxGradNorm", bind(p.maxGradNorm)},
              {"hidden", bind(p.hidden)},
              {"plateauPatience", bind(p.plateauPatience)},
              {"plateauMinDelta", bind(p.plateauMinDelta)},
              {"emaAlpha", bind(p.emaAlpha)},
              {"seed", bind(p.seed)}};
  BoConfig& b = c.bo;
  s["bo"] = {{"initSamples", bind(b.initSamples)},
             {"convergenceWindow", bind(b.convergenceWindow)},
             {"relativeTolerance", bind(b.relativeTolerance)},
             {"maxIterations", bind(b.maxIterations)},
             {"refitEvery", bind(b.refitEvery)},
             {"randomCandidates", bind(b.randomCandidates)},
             {"refineStarts", bind(b.refineStarts)},
             {"evalSeeds", bind(c.boEvalSeeds)}};
  s["eval"] = {{"seeds", bind(c.evalSeeds)}};
  return s;
}

} // namespace

AppConfig::AppConfig() { env.rewardScale = 1e-7; }

void AppConfig::validate() const {
  world.validate();
  env.validate();
  ppo.validate();
  bo.validate();
  require(boEvalSeeds >= 1, ErrorKind::Config, "bo.evalSeeds must be positive");
  require(evalSeeds >= 1, ErrorKind::Config, "eval.seeds must be positive");
}

json config_to_json(const AppConfig& c) {
  const PpoConfig& p = c.ppo;
  const BoConfig& b = c.bo;
  return json{
      {"world",
       {{"dir", c.worldDir ? json(c.worldDir->string()) : json(nullptr)},
        {"zones", c.world.zones},
        {"trips", c.world.trips},
        {"seed", c.world.seed}}},
      {"env",
       {{"scenario", to_string(c.env.scenario)},
        {"startYear", c.env.startYear},
        {"endYear", c.env.endYear},
        {"gamma", c.env.gamma},
        {"seed", c.env.seed},
        {"rewardScale", c.env.rewardScale}}},
      {"ppo",
       {{"batchSize", p.batchSize},       {"stepsPerUpdate", p.stepsPerUpdate},
        {"epochs", p.epochs},             {"entropyCoef", p.entropyCoef},
        {"klLimit", p.klLimit},           {"clip", p.clip},
        {"gaeLambda", p.gaeLambda},       {"gamma", p.gamma},
        {"parallelEnvs", p.parallelEnvs}, {"maxSteps", p.maxSteps},
        {"learningRate", p.learningRate}, {"annealLearningRate", p.annealLearningRate},
        {"valueCoef", p.valueCoef},       {"maxGradNorm", p.maxGradNorm},
        {"hidden", p.hidden},             {"plateauPatience", p.plateauPatience},
        {"plateauMinDelta", p.plateauMinDelta}, {"emaAlpha", p.emaAlpha},
        {"seed", p.seed}}},
      {"bo",
       {{"initSamples", b.initSamples},
        {"convergenceWindow", b.convergenceWindow},
        {"relativeTolerance", b.relativeTolerance},
        {"maxIterations", b.maxIterations},
        {"refitEvery", b.refitEvery},
        {"randomCandidates", b.randomCandidates},
        {"refineStarts", b.refineStarts},
        {"evalSeeds", c.boEvalSeeds}}},
      {"eval", {{"seeds", c.evalSeeds}}}};
}

void apply_config_json(AppConfig& c, const json& overlay) {
  require(overlay.is_object(), ErrorKind::Config, "config must be a JSON object");
  auto table = setters(c);
  for (const auto& [section, body] : overlay.items()) {
    auto sec = table.find(section);
    require(sec != table.end(), ErrorKind::Config, "unknown config section '" + section + "'");
    require(body.is_object(), ErrorKind::Config, "config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      auto it = sec->second.find(key);
      require(it != sec->second.end(), ErrorKind::Config, "unknown config key '" + section + "." + key + "'");
      try {
        it->second(value);
      } catch (const json::exception& e) {
        fail(ErrorKind::Config, section + "." + key + ": " + e.what());
      } catch (const Error& e) {
        fail(ErrorKind::Config, section + "." + key + ": " + e.what());
      }
    }
  }
}

AppConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
  AppConfig c;
  apply_config_json(c, j);
  return c;
}

std::string config_hash(const AppConfig& c) { return fnv1a_hex(config_to_json(c).dump()); }

} // namespace floodrl
