// floodrl command-line tool: synth, train, eval, matrix, reduced, serve.
//
// Exit codes: 0 success, 1 usage, 2 config or data, 3 runtime.

#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "floodrl/config.hpp"
#include "floodrl/experiments.hpp"
#include "floodrl/server.hpp"

#include "httplib.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace floodrl;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string compact_stamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
  return buf;
}

// Manifest persisted next to a command's outputs. Written when the run
// starts and rewritten when it completes or fails.
class Manifest {
public:
  Manifest(std::string command, fs::path dir, const AppConfig& cfg)
      : command_(std::move(command)), dir_(std::move(dir)), hash_(config_hash(cfg)), config_(config_to_json(cfg)) {
    runId_ = command_ + "-" + compact_stamp() + "-" + hash_.substr(0, 8);
    started_ = utc_now();
  }

  void seeds(const std::string& key, json value) { seeds_[key] = std::move(value); }
  void artifact(const std::string& kind, const fs::path& path) { artifacts_.push_back({{"kind", kind}, {"path", path.string()}}); }
  void extra(const std::string& key, json value) { extra_[key] = std::move(value); }

  void write(const std::string& status, const std::string& error = {}) const {
    json j{{"runId", runId_},
           {"command", command_},
           {"status", status},
           {"startedAt", started_},
           {"configHash", hash_},
           {"config", config_},
           {"seeds", seeds_},
           {"artifacts", artifacts_}};
    if (status != "running") j["finishedAt"] = utc_now();
    if (!error.empty()) j["error"] = error;
    if (!extra_.empty()) j["summary"] = extra_;
    fs::create_directories(dir_);
    write_text_file(dir_ / "manifest.json", j.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

  // Every referenced artifact must exist before the run is marked complete.
  void complete() const {
    for (const json& a : artifacts_) {
      const fs::path p = a["path"].get<std::string>();
      require(fs::exists(p), ErrorKind::Contract, "artifact missing at completion: " + p.string());
    }
    write("completed");
  }

private:
  std::string command_;
  fs::path dir_;
  std::string hash_;
  json config_;
  std::string runId_;
  std::string started_;
  json seeds_ = json::object();
  json artifacts_ = json::array();
  json extra_ = json::object();
};

std::shared_ptr<const WorldModel> load_or_synth(const AppConfig& cfg) {
  if (cfg.worldDir) return std::make_shared<const WorldModel>(load_world(*cfg.worldDir));
  return std::make_shared<const WorldModel>(synth_world(cfg.world));
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
  case ErrorKind::Validation:
  case ErrorKind::Parse:
  case ErrorKind::Completeness:
  case ErrorKind::Domain:
  case ErrorKind::Config:
  case ErrorKind::NotFound: return kExitConfig;
  default: return kExitRuntime;
  }
}

// Scenario flag check: unknown ids are usage errors that list the valid ones.
std::string check_scenario(const std::string& text) {
  if (parse_scenario(text)) return {};
  return "unknown scenario '" + text + "'; valid ids: RCP26, RCP45, RCP85";
}

struct Common {
  std::string configPath;
  std::string worldDir;
  std::string outDir = "out";
  std::string scenario;
  std::uint64_t seed = 0;
  CLI::Option* seedOpt = nullptr;
};

void add_common(CLI::App* cmd, Common& c, bool withWorld = true) {
  cmd->add_option("--config", c.configPath, "JSON config file")->check(CLI::ExistingFile);
  if (withWorld) cmd->add_option("--world", c.worldDir, "world directory (synthesized from config when absent)");
  cmd->add_option("--out", c.outDir, "output directory")->capture_default_str();
}

AppConfig base_config(const Common& c) {
  AppConfig cfg = c.configPath.empty() ? AppConfig{} : load_config(c.configPath);
  if (!c.worldDir.empty()) cfg.worldDir = c.worldDir;
  if (!c.scenario.empty()) cfg.env.scenario = scenario_or_throw(c.scenario);
  return cfg;
}

json seeds_json(std::span<const std::uint64_t> seeds) { return json(std::vector<std::uint64_t>(seeds.begin(), seeds.end())); }

std::vector<RcpScenario> parse_scenario_list(const std::string& text) {
  std::vector<RcpScenario> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(scenario_or_throw(item));
  }
  require(!out.empty(), ErrorKind::Config, "empty scenario list");
  return out;
}

void print_report_line(const RunReport& r) {
  std::cout << r.label << " " << to_string(r.scenario) << ": mean " << r.cumulative.mean << " sd " << r.cumulative.sd
            << " over " << r.cumulative.n << " seeds (I " << r.meanTotals.infrastructure << ", D "
            << r.meanTotals.delay << ", C " << r.meanTotals.cancellation << ", A " << r.meanTotals.implementation
            << ", M " << r.meanTotals.maintenance << ")\n";
}

httplib::Server* gServer = nullptr;

void stop_server(int) {
  if (gServer) gServer->stop();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pluvial-flood adaptation simulator and optimizers"};
  app.require_subcommand(1);

  // synth
  Common synthC;
  int zones = 0, trips = 0;
  std::uint64_t synthSeed = 0;
  bool force = false;
  auto* synth = app.add_subcommand("synth", "generate a synthetic world directory");
  synth->add_option("--config", synthC.configPath, "JSON config file")->check(CLI::ExistingFile);
  synth->add_option("--out", synthC.outDir, "output directory")->required();
  auto* zonesOpt = synth->add_option("--zones", zones, "zone count")->check(CLI::Range(1, 400));
  auto* tripsOpt = synth->add_option("--trips", trips, "trip count")->check(CLI::Range(1, 1000000));
  auto* synthSeedOpt = synth->add_option("--seed", synthSeed, "generator seed");
  synth->add_flag("--force", force, "overwrite existing files");

  // train
  Common trainC;
  long maxSteps = 0;
  int envs = 0;
  auto* train = app.add_subcommand("train", "train a PPO policy");
  add_common(train, trainC);
  train->add_option("--scenario", trainC.scenario, "RCP26 | RCP45 | RCP85")->check(check_scenario);
  auto* maxStepsOpt = train->add_option("--max-steps", maxSteps, "environment steps")->check(CLI::PositiveNumber);
  auto* envsOpt = train->add_option("--envs", envs, "parallel environments")->check(CLI::PositiveNumber);
  trainC.seedOpt = train->add_option("--seed", trainC.seed, "training seed");

  // eval
  Common evalC;
  std::string policy = "nc", checkpointPath;
  int evalSeeds = 0;
  bool withSteps = false;
  auto* eval = app.add_subcommand("eval", "evaluate a policy on paired seeds");
  add_common(eval, evalC);
  eval->add_option("--scenario", evalC.scenario, "RCP26 | RCP45 | RCP85")->check(check_scenario);
  eval->add_option("--policy", policy, "nc | rnd | rl")->check(CLI::IsMember({"nc", "rnd", "rl"}))->capture_default_str();
  eval->add_option("--checkpoint", checkpointPath, "policy checkpoint for --policy rl");
  auto* evalSeedsOpt = eval->add_option("--seeds", evalSeeds, "number of evaluation seeds")->check(CLI::PositiveNumber);
  eval->add_flag("--steps", withSteps, "include per-step rows in the report");

  // matrix
  Common matrixC;
  std::string beliefs = "RCP26,RCP45,RCP85";
  std::vector<std::string> checkpoints;
  int matrixSeeds = 0;
  auto* matrix = app.add_subcommand("matrix", "cross-scenario belief x reality table");
  add_common(matrix, matrixC);
  matrix->add_option("--beliefs", beliefs, "comma-separated belief scenarios")->capture_default_str();
  matrix->add_option("--checkpoints", checkpoints, "one checkpoint per belief, same order")->delimiter(',');
  auto* matrixSeedsOpt = matrix->add_option("--seeds", matrixSeeds, "evaluation seeds")->check(CLI::PositiveNumber);

  // reduced
  Common reducedC;
  std::string kind = "A";
  std::string reducedScenarios = "RCP26,RCP45,RCP85";
  int runs = 0;
  auto* reduced = app.add_subcommand("reduced", "RL vs BO on a reduced instance");
  add_common(reduced, reducedC, false);
  reduced->add_option("--kind", kind, "A | B")->check(CLI::IsMember({"A", "B"}))->capture_default_str();
  reduced->add_option("--scenarios", reducedScenarios, "comma-separated scenarios")->capture_default_str();
  auto* runsOpt = reduced->add_option("--runs", runs, "runs per method")->check(CLI::PositiveNumber);

  // serve
  Common serveC;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> servePolicies;
  std::string worldName = "default";
  auto* serve = app.add_subcommand("serve", "start the session HTTP service");
  serve->add_option("--config", serveC.configPath, "JSON config file")->check(CLI::ExistingFile);
  serve->add_option("--world", serveC.worldDir, "world directory (synthesized from config when absent)");
  serve->add_option("--name", worldName, "name the world is registered under")->capture_default_str();
  serve->add_option("--policy", servePolicies, "name=checkpoint to attach (repeatable)");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->check(CLI::Range(0, 65535))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  std::unique_ptr<Manifest> manifest;
  try {
    if (*synth) {
      AppConfig cfg = base_config(synthC);
      if (*zonesOpt) cfg.world.zones = zones;
      if (*tripsOpt) cfg.world.trips = trips;
      if (*synthSeedOpt) cfg.world.seed = synthSeed;
      cfg.world.validate();
      const fs::path dir = synthC.outDir;
      save_world(synth_world(cfg.world), dir, force);
      std::cout << "wrote world (" << cfg.world.zones << " zones, " << cfg.world.trips << " trips) to " << dir
                << "\n";
      return 0;
    }

    if (*train) {
      AppConfig cfg = base_config(trainC);
      if (*maxStepsOpt) cfg.ppo.maxSteps = maxSteps;
      if (*envsOpt) cfg.ppo.parallelEnvs = envs;
      if (*trainC.seedOpt) cfg.ppo.seed = trainC.seed;
      cfg.validate();
      manifest = std::make_unique<Manifest>("train", trainC.outDir, cfg);
      manifest->seeds("ppo", cfg.ppo.seed);
      manifest->seeds("env", cfg.env.seed);
      manifest->write("running");
      auto world = load_or_synth(cfg);
      const fs::path curvePath = manifest->dir() / "curve.jsonl";
      std::ofstream curve(curvePath, std::ios::trunc);
      require(static_cast<bool>(curve), ErrorKind::Validation, "cannot write " + curvePath.string());
      TrainResult result;
      const PolicyParams params =
          train_flood_policy(world, cfg.env, cfg.ppo, &result, [&](const PpoTrainer&, const CurvePoint& p) {
            curve << json{{"update", p.update},
                          {"step", p.step},
                          {"episodes", p.episodes},
                          {"meanReturn", p.meanReturn},
                          {"meanReturnRaw", p.meanReturnRaw},
                          {"smoothed", p.smoothed}}
                         .dump()
                  << "\n";
            if (p.update % 20 == 0)
              std::cerr << "update " << p.update << " step " << p.step << " return " << p.meanReturnRaw << "\n";
          });
      curve.close();
      const fs::path policyPath = manifest->dir() / "policy.json";
      save_policy(params, policyPath);
      manifest->artifact("checkpoint", policyPath);
      manifest->artifact("curve", curvePath);
      manifest->extra("updates", result.updates);
      manifest->extra("steps", result.steps);
      manifest->extra("plateaued", result.plateaued);
      manifest->complete();
      std::cout << "trained " << result.steps << " steps in " << result.updates << " updates; checkpoint "
                << policyPath.string() << "\n";
      return 0;
    }

    if (*eval) {
      AppConfig cfg = base_config(evalC);
      if (*evalSeedsOpt) cfg.evalSeeds = evalSeeds;
      cfg.validate();
      PolicySpec spec = PolicySpec::no_control();
      if (policy == "rnd") spec = PolicySpec::random();
      if (policy == "rl") {
        require(!checkpointPath.empty(), ErrorKind::Config, "--policy rl needs --checkpoint");
        require(fs::exists(checkpointPath), ErrorKind::Config, "checkpoint not found: " + checkpointPath);
        spec = PolicySpec::checkpoint(checkpointPath);
      }
      manifest = std::make_unique<Manifest>("eval", evalC.outDir, cfg);
      const auto seeds = default_eval_seeds(cfg.evalSeeds);
      manifest->seeds("eval", seeds_json(seeds));
      manifest->write("running");
      const RunReport report = run_policy(load_or_synth(cfg), cfg.env, spec, seeds);
      const fs::path reportPath = manifest->dir() / ("report_" + policy + ".json");
      write_text_file(reportPath, report_json(report, withSteps).dump(2) + "\n");
      manifest->artifact("report", reportPath);
      manifest->extra("mean", report.cumulative.mean);
      manifest->extra("sd", report.cumulative.sd);
      manifest->complete();
      print_report_line(report);
      return 0;
    }

    if (*matrix) {
      AppConfig cfg = base_config(matrixC);
      if (*matrixSeedsOpt) cfg.evalSeeds = matrixSeeds;
      cfg.validate();
      const auto beliefList = parse_scenario_list(beliefs);
      require(checkpoints.size() == beliefList.size(), ErrorKind::Config,
              "--checkpoints needs one checkpoint per belief (" + std::to_string(beliefList.size()) + ")");
      std::map<RcpScenario, PolicySpec> specs;
      for (std::size_t i = 0; i < beliefList.size(); ++i) {
        require(fs::exists(checkpoints[i]), ErrorKind::Config, "checkpoint not found: " + checkpoints[i]);
        specs[beliefList[i]] = PolicySpec::checkpoint(checkpoints[i]);
      }
      manifest = std::make_unique<Manifest>("matrix", matrixC.outDir, cfg);
      const auto seeds = default_eval_seeds(cfg.evalSeeds);
      manifest->seeds("eval", seeds_json(seeds));
      manifest->write("running");
      const CrossMatrix m = cross_scenario_matrix(load_or_synth(cfg), cfg.env, specs, seeds);
      const fs::path out = manifest->dir() / "matrix.json";
      write_text_file(out, matrix_json(m).dump(2) + "\n");
      manifest->artifact("table", out);
      manifest->complete();
      std::cout << "belief \\ reality";
      for (RcpScenario r : m.realities) std::cout << "\t" << to_string(r);
      std::cout << "\n";
      for (int b = 0; b < 3; ++b) {
        std::cout << to_string(m.beliefs[b]);
        for (int r = 0; r < 3; ++r) std::cout << "\t" << m.cells[b][r].mean << " (" << m.cells[b][r].sd << ")";
        std::cout << (row_nonincreasing(m, b) ? "\tnonincreasing" : "\tnot monotone") << "\n";
      }
      return 0;
    }

    if (*reduced) {
      AppConfig cfg = base_config(reducedC);
      ReducedConfig rc = reduced_preset(kind[0]);
      if (!reducedC.configPath.empty()) {
        // a config file overrides the preset's optimizer settings
        rc.ppo = cfg.ppo;
        rc.bo = cfg.bo;
        rc.boEvalSeeds = cfg.boEvalSeeds;
        rc.evalSeeds = cfg.evalSeeds;
      }
      if (*runsOpt) rc.runs = runs;
      rc.validate();
      const auto scenarios = parse_scenario_list(reducedScenarios);
      AppConfig recorded = cfg;
      recorded.ppo = rc.ppo;
      recorded.bo = rc.bo;
      manifest = std::make_unique<Manifest>("reduced", reducedC.outDir, recorded);
      manifest->seeds("world", rc.worldSeed);
      manifest->seeds("runs", rc.runs);
      manifest->seeds("eval", seeds_json(default_eval_seeds(rc.evalSeeds)));
      manifest->extra("kind", kind);
      manifest->write("running");
      const ReducedTable t = reduced_experiment(rc, scenarios, [](const std::string& line) { std::cerr << line << "\n"; });
      const fs::path out = manifest->dir() / "reduced.json";
      write_text_file(out, reduced_json(t).dump(2) + "\n");
      manifest->artifact("table", out);
      manifest->complete();
      std::cout << "scenario\tRL mean (sd)\tBO mean (sd)\n";
      for (const ReducedRow& row : t.rows) {
        std::cout << to_string(row.scenario) << "\t" << row.rl.mean << " (" << row.rl.sd << ")\t" << row.bo.mean
                  << " (" << row.bo.sd << ")\n";
      }
      return 0;
    }

    if (*serve) {
      AppConfig cfg = base_config(serveC);
      cfg.validate();
      SessionService service;
      service.register_world(worldName, load_or_synth(cfg));
      for (const std::string& entry : servePolicies) {
        const auto eq = entry.find('=');
        require(eq != std::string::npos && eq > 0, ErrorKind::Config, "--policy expects name=checkpoint");
        const std::string path = entry.substr(eq + 1);
        require(fs::exists(path), ErrorKind::Config, "checkpoint not found: " + path);
        service.register_policy(entry.substr(0, eq), std::make_shared<const PolicyParams>(load_policy(path)));
      }
      httplib::Server server;
      mount_routes(server, service);
      gServer = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
      require(bound > 0, ErrorKind::Config, "cannot bind " + host + ":" + std::to_string(port));
      std::cout << "listening on http://" << host << ":" << bound << std::endl;
      server.listen_after_bind();
      gServer = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    if (manifest) {
      try {
        manifest->write("failed", e.what());
      } catch (...) {
      }
    }
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (manifest) {
      try {
        manifest->write("failed", e.what());
      } catch (...) {
      }
    }
    return kExitRuntime;
  }
  return kExitUsage;
}
