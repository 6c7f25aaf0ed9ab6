#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "floodrl/env.hpp"

namespace floodrl {

/// Open-loop plan: one action id per (zone, year), zone-major.
struct ActionPlan {
  int zones = 0;
  int years = 0;
  std::vector<int> actions;

  ActionPlan() = default;
  ActionPlan(int z, int y) : zones(z), years(y), actions(static_cast<std::size_t>(z) * y, 0) {}
  int& at(int zone, int year) { return actions[static_cast<std::size_t>(zone) * years + year]; }
  int at(int zone, int year) const { return actions[static_cast<std::size_t>(zone) * years + year]; }
  /// Digits, zone-major, '/' between zones.
  std::string id() const;
  friend bool operator==(const ActionPlan&, const ActionPlan&) = default;
};

/// One-hot per cell, concatenated in zone-major order.
Eigen::VectorXd encode_plan(const ActionPlan& plan);
/// Argmax per cell (lowest index on ties).
ActionPlan decode_plan(const Eigen::VectorXd& code, int zones, int years);

/// Matérn 5/2 with per-dimension length scales.
double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& lengthscales,
                double signalVariance);

struct GpHyper {
  Eigen::VectorXd logLengthscales;
  double logSignalVariance = 0.0;
  double logNoiseVariance = std::log(1e-2);
};

struct GpConfig {
  int restarts = 2;     // random starts besides the warm start
  int iterations = 60;  // Adam steps per start
  double learningRate = 0.05;
  double minNoiseVariance = 1e-6; // standardized units
  /// Weak log-normal prior widths (in log units) keeping ARD scales tame.
  double lengthscalePriorSd = 2.0;
  double noisePriorSd = 3.0;
  std::uint64_t seed = 0;
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0; // latent function, excludes observation noise
};

class GpSurrogate {
public:
  /// Posterior under fixed hyperparameters. Escalates jitter on a failed
  /// Cholesky and reports a Numerical error if that does not help.
  GpSurrogate(Eigen::MatrixXd X, const Eigen::VectorXd& y, GpHyper hyper);

  GpPrediction predict(const Eigen::VectorXd& x) const;
  /// One query per row.
  std::vector<GpPrediction> predict_many(const Eigen::MatrixXd& Xq) const;
  const GpHyper& hyper() const { return hyper_; }
  double noise_variance() const; // original units
  double jitter() const { return jitter_; }
  int size() const { return static_cast<int>(X_.rows()); }
  double y_mean() const { return yMean_; }

private:
  Eigen::MatrixXd X_;
  Eigen::MatrixXd Xs_; // rows scaled by 1 / lengthscale
  Eigen::VectorXd lengthscales_;
  GpHyper hyper_;
  double yMean_ = 0.0, ySd_ = 1.0;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

/// Log marginal likelihood of standardized targets (no priors), with the
/// gradient over [log lengthscales..., log signal, log noise] when requested.
double gp_log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& yStd, const GpHyper& h,
                                  Eigen::VectorXd* grad);

/// Multi-start ascent of the log marginal likelihood plus weak priors.
/// Needs at least two points and finite values.
GpSurrogate gp_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpConfig& config,
                   const GpHyper* warmStart = nullptr);

/// Closed-form EI for maximization: sd phi(z) + (mean - best) Phi(z).
double expected_improvement(double mean, double sd, double best);
/// log EI, accurate far into the lower tail.
double log_expected_improvement(double mean, double sd, double best);
double expected_improvement(const GpSurrogate& gp, const Eigen::VectorXd& x, double best);

/// Plan evaluation protocol: projection to feasibility and averaged return.
struct PlanObjective {
  int zones = 0;
  int years = 0;
  std::function<ActionPlan(const ActionPlan&)> project;
  std::function<double(const ActionPlan&)> evaluate;
};

/// Masked cells of the plan become DoNothing (simulated in year order).
ActionPlan project_plan(const ActionPlan& plan, const WorldModel& world, int startYear);

/// Mean undiscounted raw return of the plan over the given event seeds.
double evaluate_plan(const ActionPlan& plan, std::shared_ptr<const WorldModel> world, const EnvConfig& env,
                     const std::vector<std::uint64_t>& seeds);

PlanObjective flood_plan_objective(std::shared_ptr<const WorldModel> world, EnvConfig env,
                                   std::vector<std::uint64_t> seeds);

/// Random plan drawn like the Random policy: uniform over unmasked actions.
ActionPlan random_feasible_plan(const WorldModel& world, int startYear, int years, Rng& rng);

struct BoConfig {
  int initSamples = 1000;
  int convergenceWindow = 100;
  double relativeTolerance = 1e-4;
  int maxIterations = 2000;
  int refitEvery = 10;
  int randomCandidates = 512;
  int refineStarts = 4;
  GpConfig gp;

  void validate() const;
};

struct BoStep {
  int iteration = 0; // 0 for initial samples
  std::string planId;
  double value = 0.0;
  double incumbent = 0.0;
};

struct BoResult {
  ActionPlan best;
  double bestValue = 0.0;
  std::vector<BoStep> history;
  int iterations = 0;
  bool converged = false;
  int evaluations = 0;
};

/// initSamples: if larger than the number of distinct plans the objective
/// can produce, sampling stops once no new plan turns up in 50 draws.
BoResult bo_optimize(const PlanObjective& objective, const BoConfig& config, Rng& rng,
                     const std::function<ActionPlan(Rng&)>& sampler);

std::string bo_history_line(const BoStep& step);

} // namespace floodrl
