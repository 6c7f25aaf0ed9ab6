#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "floodrl/policy.hpp"

namespace floodrl {

struct Observation {
  std::shared_ptr<const Eigen::MatrixXd> adjacency; // normalized
  Eigen::MatrixXd features;
  std::vector<ActionMask> masks;
};

struct EnvTransition {
  Observation next;
  double reward = 0.0;    // training units
  double rawReward = 0.0; // reporting units (DKK for the flood env)
  RewardComponents components;
  bool done = false;
};

/// Episodic graph environment driven by the trainer. reset and step must be
/// deterministic given the seed and the action sequence (resume replays them).
class RlEnvironment {
public:
  virtual ~RlEnvironment() = default;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual EnvTransition step(std::span<const int> actions) = 0;
  virtual int input_dim() const = 0;
};

/// Policy input for the env's current state; the time feature is
/// steps taken over the horizon.
Observation observe_env(const FloodEnv& env, std::shared_ptr<const Eigen::MatrixXd> adjacency);

/// FloodEnv with policy features and scaled rewards.
class FloodRlEnv : public RlEnvironment {
public:
  FloodRlEnv(std::shared_ptr<const WorldModel> world, EnvConfig config);
  Observation reset(std::uint64_t seed) override;
  EnvTransition step(std::span<const int> actions) override;
  int input_dim() const override { return kPolicyInputDim; }

  const FloodEnv& env() const { return env_; }
  Observation observe() const;

private:
  FloodEnv env_;
  std::shared_ptr<const Eigen::MatrixXd> adjacency_;
};

using EnvFactory = std::function<std::unique_ptr<RlEnvironment>(int index)>;

struct PpoConfig {
  int batchSize = 64;
  int stepsPerUpdate = 1024; // per environment
  int epochs = 10;
  double entropyCoef = 0.01;
  double klLimit = 0.2;
  double clip = 0.2;
  double gaeLambda = 0.95;
  double gamma = 0.99;
  int parallelEnvs = 10;
  long maxSteps = 4'500'000;
  double learningRate = 3e-4;
  /// Linear decay towards 5% of learningRate over maxSteps.
  bool annealLearningRate = false;
  double valueCoef = 0.5;
  double maxGradNorm = 0.5;
  int hidden = 64;
  /// Stop after this many consecutive updates without a new best smoothed
  /// return; 0 disables the check.
  int plateauPatience = 0;
  double plateauMinDelta = 0.0;
  double emaAlpha = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Transition {
  std::shared_ptr<const Eigen::MatrixXd> adjacency;
  Eigen::MatrixXd features;
  std::vector<ActionMask> masks;
  std::vector<int> actions;
  double logProb = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  double advantage = 0.0;
  double ret = 0.0;
};

/// Environment-major storage: data[e * steps + t].
struct RolloutBuffer {
  int envs = 0;
  int steps = 0;
  std::vector<Transition> data;
  /// Value of the observation after each environment's final step.
  std::vector<double> bootstrap;

  Transition& at(int env, int t) { return data[static_cast<std::size_t>(env) * steps + t]; }
  std::size_t size() const { return data.size(); }
};

/// Fills advantage and ret (ret = advantage + value); a done transition
/// ignores the value after it.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);
/// Rescales advantages to mean 0, sd 1 (left alone when sd is 0).
void normalize_advantages(RolloutBuffer& buffer);

struct UpdateMetrics {
  int epochsRun = 0;
  /// KL(old || new) over the buffer before each epoch and after the last one.
  std::vector<double> klPerEpoch;
  double meanKl = 0.0;
  double clipFraction = 0.0;
  double policyLoss = 0.0;
  double valueLoss = 0.0;
  double entropy = 0.0;
  bool klAbort = false;
};

struct CurvePoint {
  long step = 0;
  int update = 0;
  int episodes = 0;      // completed during this update
  double meanReturn = 0; // training units, undiscounted
  double meanReturnRaw = 0;
  RewardComponents meanComponents;
  double smoothed = 0;
};

std::string curve_line(const CurvePoint& p);

struct TrainResult {
  std::vector<CurvePoint> curve;
  int updates = 0;
  long steps = 0;
  bool plateaued = false;
};

class PpoTrainer {
public:
  PpoTrainer(PpoConfig config, EnvFactory factory);

  RolloutBuffer collect();
  UpdateMetrics update(RolloutBuffer& buffer);
  /// One collect + update round; returns the curve point it produced.
  CurvePoint iterate();
  /// Runs until maxSteps or plateau. on_update may write checkpoints.
  TrainResult train(const std::function<void(const PpoTrainer&, const CurvePoint&)>& on_update = {});

  const PolicyParams& params() const { return params_; }
  PolicyParams& mutable_params() { return params_; }
  const PpoConfig& config() const { return config_; }
  long steps() const { return steps_; }
  int updates() const { return updates_; }
  bool plateaued() const;
  /// Step size for the next update.
  double current_learning_rate() const;
  const std::vector<CurvePoint>& curve() const { return curve_; }

  /// Training state (weights, optimizer, streams, counters, open episodes).
  std::string save_state() const;
  void load_state(std::string_view bytes);

private:
  struct Slot {
    std::unique_ptr<RlEnvironment> env;
    Observation obs;
    std::uint64_t episodeSeed = 0;
    long episodeIndex = 0;
    std::vector<std::vector<int>> history; // actions of the open episode
    double episodeReturn = 0.0;
    double episodeReturnRaw = 0.0;
    RewardComponents episodeComponents;
  };

  std::uint64_t episode_seed(int env, long index) const;
  void start_episode(Slot& slot, int env);

  PpoConfig config_;
  EnvFactory factory_;
  PolicyParams params_;
  Adam adam_;
  Rng sampleRng_;
  Rng shuffleRng_;
  std::vector<Slot> slots_;
  long steps_ = 0;
  int updates_ = 0;
  std::optional<double> ema_;
  double bestEma_ = 0.0;
  bool haveBest_ = false;
  int sinceBest_ = 0;
  std::vector<CurvePoint> curve_;
  // episodes finished since the last curve point
  int doneEpisodes_ = 0;
  double doneReturn_ = 0.0, doneReturnRaw_ = 0.0;
  RewardComponents doneComponents_;
};

} // namespace floodrl
