#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "floodrl/world.hpp"

namespace floodrl {

struct EnvConfig {
  RcpScenario scenario = RcpScenario::RCP45;
  int startYear = 2024;
  int endYear = 2100;
  double gamma = 0.99;
  std::uint64_t seed = 0;
  /// Multiplies raw DKK rewards for the optimizers.
  double rewardScale = 1e-8;
  /// Overrides the sampled depth; the uniform is still drawn so the stream
  /// stays aligned with unforced runs.
  std::optional<double> fixedRain_mm;

  void validate() const;
  int horizon() const { return endYear - startYear + 1; }
};

/// Per-zone feature columns: I, D, C, then one status entry per physical measure.
inline constexpr int kZoneFeatureCount = 3 + kPhysicalMeasureCount;
using ZoneState = Eigen::MatrixXd; // zones x kZoneFeatureCount

/// Static per-zone descriptors available to policies; see WorldModel.
inline constexpr int kDescriptorCount = 5;
using ZoneDescriptors = Eigen::MatrixXd; // zones x kDescriptorCount

/// Shared, immutable per-world precomputation.
struct WorldModel {
  World world;
  DepressionHierarchy hierarchy;
  std::vector<ZoneRoadStats> roadStats;
  ZoneGraph graph;
  /// log car roads, log paved area, reference-storm mean road depth,
  /// log reference-storm stored volume, log trip origins.
  ZoneDescriptors descriptors;

  explicit WorldModel(World w);
  int zone_count() const { return graph.zones; }
};

/// Reference storm used for the descriptors (mm).
inline constexpr double kReferenceStorm_mm = 50.0;

struct RewardComponents {
  double infrastructure = 0.0;
  double delay = 0.0;
  double cancellation = 0.0;
  double implementation = 0.0;
  double maintenance = 0.0;

  double total() const { return infrastructure + delay + cancellation + implementation + maintenance; }
  RewardComponents& operator+=(const RewardComponents& o);
};

struct StepResult {
  int year = 0;
  std::vector<int> actions;
  ZoneState state;
  double reward = 0.0;
  double scaledReward = 0.0;
  RewardComponents components;
  ZoneImpacts impacts;
  std::vector<double> implementation_dkk; // per zone
  std::vector<double> maintenance_dkk;    // per zone
  bool done = false;
  RainEvent event;
};

class FloodEnv {
public:
  FloodEnv(std::shared_ptr<const WorldModel> world, EnvConfig config);

  const ZoneState& reset();
  const ZoneState& reset(std::uint64_t seed);
  StepResult step(std::span<const int> actions);

  std::vector<ActionMask> masks() const;
  const ZoneState& state() const { return state_; }
  const ZoneGraph& graph() const { return world_->graph; }
  const WorldModel& world() const { return *world_; }
  std::shared_ptr<const WorldModel> world_ptr() const { return world_; }
  const EnvConfig& config() const { return config_; }
  const DeploymentLedger& ledger() const { return ledger_; }
  int zone_count() const { return world_->zone_count(); }
  int year() const { return year_; }
  int steps_taken() const { return year_ - config_.startYear; }
  bool started() const { return started_; }
  bool done() const { return started_ && year_ > config_.endYear; }
  std::uint64_t episode_seed() const { return episodeSeed_; }
  const Rng& event_rng() const { return events_; }
  /// Restarts the event stream from `seed` without touching anything else
  /// (used for previews on a copied env).
  void reseed_events(std::uint64_t seed) { events_.reseed(seed); }

private:
  std::shared_ptr<const WorldModel> world_;
  EnvConfig config_;
  DeploymentLedger ledger_;
  Rng events_;
  ZoneState state_;
  int year_ = 0;
  bool started_ = false;
  std::uint64_t episodeSeed_ = 0;
};

/// Sum of gamma^(t-1) r_t. Empty input is a validation error.
double episode_return(std::span<const double> rewards, double gamma);

/// One line of the trajectory log (JSON object, no trailing newline).
std::string trajectory_line(const StepResult& result);

} // namespace floodrl
