#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "floodrl/bayesopt.hpp"
#include "floodrl/ppo.hpp"

namespace floodrl {

enum class PolicyKind { NoControl, Random, TrainedRL, BoPlan, Scripted };

std::string to_string(PolicyKind k);

struct PolicySpec {
  PolicyKind kind = PolicyKind::NoControl;
  std::string label;
  std::shared_ptr<const PolicyParams> params; // TrainedRL
  bool sampleActions = false;                 // TrainedRL: sample instead of argmax
  std::optional<ActionPlan> plan;             // BoPlan
  std::vector<std::vector<int>> script;       // Scripted: one joint action per year

  /// Source present iff the kind needs one (Config error otherwise).
  void validate() const;

  static PolicySpec no_control();
  static PolicySpec random();
  static PolicySpec trained(std::shared_ptr<const PolicyParams> params, bool sample = false);
  static PolicySpec checkpoint(const std::filesystem::path& path, bool sample = false);
  static PolicySpec bo_plan(ActionPlan plan);
  static PolicySpec scripted(std::vector<std::vector<int>> script);
};

/// Uniform over the unmasked actions of each zone.
std::vector<int> random_actions(std::span<const ActionMask> masks, Rng& rng);

struct Summary {
  double mean = 0.0;
  double sd = 0.0; // sample sd, 0 for a single value
  int n = 0;
};
Summary summarize(std::span<const double> values);

struct StepRecord {
  int year = 0;
  double rain_mm = 0.0;
  std::vector<int> actions;
  RewardComponents components;
  double reward = 0.0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  RewardComponents totals;
  double cumulativeReward = 0.0; // undiscounted, DKK
  double discountedReturn = 0.0;
};

struct RunReport {
  std::string label;
  RcpScenario scenario = RcpScenario::RCP45;
  std::vector<SeedRun> runs;
  Summary cumulative;
  RewardComponents meanTotals;
};

/// Plays the policy for one episode per seed. Every policy sees the same
/// event stream for a given seed.
RunReport run_policy(std::shared_ptr<const WorldModel> world, const EnvConfig& env, const PolicySpec& spec,
                     std::span<const std::uint64_t> seeds);

nlohmann::json report_json(const RunReport& report, bool withSteps = false);

/// Seeds 1..n.
std::vector<std::uint64_t> default_eval_seeds(int n = 10);

/// Trains a policy on the flood env; result is filled when given.
PolicyParams train_flood_policy(std::shared_ptr<const WorldModel> world, const EnvConfig& env,
                                const PpoConfig& ppo, TrainResult* result = nullptr,
                                const std::function<void(const PpoTrainer&, const CurvePoint&)>& on_update = {});

struct CrossMatrix {
  std::array<RcpScenario, 3> beliefs = kAllScenarios;
  std::array<RcpScenario, 3> realities = kAllScenarios;
  std::array<std::array<Summary, 3>, 3> cells{}; // [belief][reality]
};

/// Evaluates each belief policy under every realized scenario.
/// A missing belief is a Config error.
CrossMatrix cross_scenario_matrix(std::shared_ptr<const WorldModel> world, const EnvConfig& base,
                                  const std::map<RcpScenario, PolicySpec>& beliefs,
                                  std::span<const std::uint64_t> seeds);

/// Row mean does not rise with severity beyond one sd of either cell.
bool row_nonincreasing(const CrossMatrix& m, int belief);

nlohmann::json matrix_json(const CrossMatrix& m);

struct ReducedConfig {
  int zones = 4;
  int years = 5;
  int trips = 120;
  std::uint64_t worldSeed = 7;
  int runs = 3;
  int evalSeeds = 10;
  int boEvalSeeds = 3;
  PpoConfig ppo;
  BoConfig bo;
  double rewardScale = 1e-7;

  void validate() const;
};

/// 'A': 4 zones x 5 years; 'B': 6 zones x 10 years.
ReducedConfig reduced_preset(char kind);

struct ReducedRow {
  RcpScenario scenario = RcpScenario::RCP45;
  Summary rl;
  Summary bo;
  std::vector<double> rlRuns, boRuns;
  std::vector<ActionPlan> boPlans;
  double seconds = 0.0;
};

struct ReducedTable {
  int zones = 0;
  int years = 0;
  std::vector<ReducedRow> rows;
};

/// RL and BO on the same reduced instance, 3 runs each; both are scored on
/// held-out paired evaluation seeds.
ReducedTable reduced_experiment(const ReducedConfig& config, std::span<const RcpScenario> scenarios,
                                const std::function<void(const std::string&)>& log = {});

nlohmann::json reduced_json(const ReducedTable& t);

struct PathwayReport {
  int zones = 0;
  int years = 0;
  bool truncated = false;
  struct Entry {
    int zone;
    int year;
    MeasureId measure;
  };
  std::vector<Entry> raster; // deployments only
  std::array<int, kPhysicalMeasureCount> counts{};
  std::array<double, kPhysicalMeasureCount> shares{}; // zero when nothing deployed
};

/// expectedSteps < 0 skips the truncation check.
PathwayReport pathway_report(std::span<const StepRecord> steps, int zones, int expectedSteps = -1);

nlohmann::json pathway_json(const PathwayReport& p);

} // namespace floodrl
