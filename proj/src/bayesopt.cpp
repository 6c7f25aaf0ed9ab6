#include "floodrl/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "floodrl/policy.hpp"

namespace floodrl {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

Eigen::MatrixXd scaled_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& lengthscales) {
  return X * lengthscales.cwiseInverse().asDiagonal();
}

// Pairwise distances between rows of scaled inputs.
Eigen::MatrixXd distances(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::VectorXd a2 = A.rowwise().squaredNorm();
  const Eigen::VectorXd b2 = B.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * A * B.transpose()).colwise() + a2;
  d2.rowwise() += b2.transpose();
  return d2.cwiseMax(0.0).cwiseSqrt();
}

Eigen::MatrixXd matern_from_r(const Eigen::MatrixXd& r, double signal) {
  return r.unaryExpr([signal](double d) {
    const double s = kSqrt5 * d;
    return signal * (1.0 + s + s * s / 3.0) * std::exp(-s);
  });
}

// Log-normal priors on the length scales and the noise variance.
struct Priors {
  double lengthCentre = 0.0;
  double lengthSd = 2.0;
  double noiseCentre = std::log(1e-2);
  double noiseSd = 3.0;
};

Priors priors_for(int dim, const GpConfig& c) {
  Priors p;
  p.lengthCentre = 0.5 * std::log(static_cast<double>(dim));
  p.lengthSd = c.lengthscalePriorSd;
  p.noiseSd = c.noisePriorSd;
  return p;
}

Eigen::VectorXd pack(const GpHyper& h) {
  const Eigen::Index d = h.logLengthscales.size();
  Eigen::VectorXd v(d + 2);
  v.head(d) = h.logLengthscales;
  v(d) = h.logSignalVariance;
  v(d + 1) = h.logNoiseVariance;
  return v;
}

GpHyper unpack(const Eigen::VectorXd& v) {
  const Eigen::Index d = v.size() - 2;
  GpHyper h;
  h.logLengthscales = v.head(d);
  h.logSignalVariance = v(d);
  h.logNoiseVariance = v(d + 1);
  return h;
}

void clamp_hyper(Eigen::VectorXd& v, const GpConfig& c) {
  const Eigen::Index d = v.size() - 2;
  for (Eigen::Index i = 0; i < d; ++i) v(i) = std::clamp(v(i), std::log(1e-2), std::log(1e3));
  v(d) = std::clamp(v(d), std::log(1e-2), std::log(1e2));
  v(d + 1) = std::clamp(v(d + 1), std::log(c.minNoiseVariance), 0.0);
}

double log_posterior(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& v,
                     const Priors& p, Eigen::VectorXd* grad) {
  const GpHyper h = unpack(v);
  double lp = gp_log_marginal_likelihood(X, y, h, grad);
  if (!std::isfinite(lp)) return lp;
  const Eigen::Index d = v.size() - 2;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double u = (v(i) - p.lengthCentre) / p.lengthSd;
    lp -= 0.5 * u * u;
    if (grad) (*grad)(i) -= u / p.lengthSd;
  }
  const double u = (v(d + 1) - p.noiseCentre) / p.noiseSd;
  lp -= 0.5 * u * u;
  if (grad) (*grad)(d + 1) -= u / p.noiseSd;
  return lp;
}

struct Standardized {
  Eigen::VectorXd y;
  double mean = 0.0;
  double sd = 1.0;
};

Standardized standardize(const Eigen::VectorXd& y) {
  Standardized s;
  s.mean = y.mean();
  const double var = (y.array() - s.mean).square().mean();
  s.sd = var > 1e-24 ? std::sqrt(var) : 1.0;
  s.y = (y.array() - s.mean) / s.sd;
  return s;
}

} // namespace

std::string ActionPlan::id() const {
  std::string out;
  out.reserve(actions.size() + zones);
  for (int z = 0; z < zones; ++z) {
    if (z > 0) out.push_back('/');
    for (int y = 0; y < years; ++y) out.push_back(static_cast<char>('0' + at(z, y)));
  }
  return out;
}

Eigen::VectorXd encode_plan(const ActionPlan& plan) {
  require(static_cast<int>(plan.actions.size()) == plan.zones * plan.years, ErrorKind::Validation,
          "plan size does not match zones x years");
  Eigen::VectorXd code = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(plan.actions.size()) * kActionCount);
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    const int a = plan.actions[i];
    require(a >= 0 && a < kActionCount, ErrorKind::Validation, "plan action out of range");
    code(static_cast<Eigen::Index>(i) * kActionCount + a) = 1.0;
  }
  return code;
}

ActionPlan decode_plan(const Eigen::VectorXd& code, int zones, int years) {
  require(code.size() == static_cast<Eigen::Index>(zones) * years * kActionCount, ErrorKind::Validation,
          "plan code has the wrong length");
  ActionPlan plan(zones, years);
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    Eigen::Index best = 0;
    code.segment(static_cast<Eigen::Index>(i) * kActionCount, kActionCount).maxCoeff(&best);
    plan.actions[i] = static_cast<int>(best);
  }
  return plan;
}

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& lengthscales,
                double signalVariance) {
  const double r = ((a - b).array() / lengthscales.array()).matrix().norm();
  const double s = kSqrt5 * r;
  return signalVariance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double gp_log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyper& h,
                                  Eigen::VectorXd* grad) {
  const Eigen::Index n = X.rows(), d = X.cols();
  require(h.logLengthscales.size() == d, ErrorKind::Validation, "length scale count differs from input width");
  const Eigen::VectorXd ell = h.logLengthscales.array().exp();
  const double signal = std::exp(h.logSignalVariance);
  const double noise = std::exp(h.logNoiseVariance);

  const Eigen::MatrixXd r = distances(scaled_rows(X, ell), scaled_rows(X, ell));
  const Eigen::MatrixXd Kf = matern_from_r(r, signal);
  Eigen::MatrixXd K = Kf;
  K.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd L = llt.matrixL();
  const double lml = -0.5 * y.dot(alpha) - L.diagonal().array().log().sum() -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (grad) {
    grad->resize(d + 2);
    Eigen::MatrixXd W = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
    (*grad)(d) = 0.5 * (W.cwiseProduct(Kf)).sum();
    (*grad)(d + 1) = 0.5 * noise * W.trace();
    // dK/dlog l_k = signal 5/3 (1 + sqrt5 r) exp(-sqrt5 r) (dx_k / l_k)^2
    const Eigen::MatrixXd G = r.unaryExpr([signal](double v) {
      const double s = kSqrt5 * v;
      return signal * (5.0 / 3.0) * (1.0 + s) * std::exp(-s);
    });
    const Eigen::MatrixXd M = W.cwiseProduct(G);
    const Eigen::VectorXd rows = M.rowwise().sum();
    const Eigen::VectorXd quad = X.cwiseProduct(M * X).colwise().sum().transpose();
    const Eigen::VectorXd lin = X.cwiseAbs2().transpose() * rows;
    grad->head(d) = (lin - quad).cwiseQuotient(ell.cwiseAbs2());
  }
  return lml;
}

GpSurrogate::GpSurrogate(Eigen::MatrixXd X, const Eigen::VectorXd& y, GpHyper hyper)
    : X_(std::move(X)), hyper_(std::move(hyper)) {
  const Eigen::Index n = X_.rows();
  require(n >= 1 && y.size() == n, ErrorKind::Validation, "GP needs matching inputs and targets");
  require(hyper_.logLengthscales.size() == X_.cols(), ErrorKind::Validation,
          "length scale count differs from input width");
  require(X_.allFinite() && y.allFinite(), ErrorKind::Numerical, "GP data contains non-finite values");
  const Standardized s = standardize(y);
  yMean_ = s.mean;
  ySd_ = s.sd;
  lengthscales_ = hyper_.logLengthscales.array().exp();
  Xs_ = scaled_rows(X_, lengthscales_);
  const double signal = std::exp(hyper_.logSignalVariance);
  Eigen::MatrixXd K = matern_from_r(distances(Xs_, Xs_), signal);
  K.diagonal().array() += std::exp(hyper_.logNoiseVariance);
  llt_.compute(K);
  double jitter = 1e-10 * signal;
  while (llt_.info() != Eigen::Success) {
    if (jitter > 1e-2 * signal) fail(ErrorKind::Numerical, "GP covariance is not positive definite");
    K.diagonal().array() += jitter - jitter_;
    jitter_ = jitter;
    llt_.compute(K);
    jitter *= 10.0;
  }
  alpha_ = llt_.solve(s.y);
}

std::vector<GpPrediction> GpSurrogate::predict_many(const Eigen::MatrixXd& Xq) const {
  require(Xq.cols() == X_.cols(), ErrorKind::Validation, "query width differs from training inputs");
  const double signal = std::exp(hyper_.logSignalVariance);
  const Eigen::MatrixXd Ks = matern_from_r(distances(scaled_rows(Xq, lengthscales_), Xs_), signal);
  const Eigen::VectorXd mean = Ks * alpha_;
  const Eigen::MatrixXd V = llt_.matrixL().solve(Ks.transpose());
  const Eigen::VectorXd explained = V.colwise().squaredNorm().transpose();
  std::vector<GpPrediction> out(static_cast<std::size_t>(Xq.rows()));
  for (Eigen::Index i = 0; i < Xq.rows(); ++i) {
    out[i].mean = yMean_ + ySd_ * mean(i);
    out[i].variance = ySd_ * ySd_ * std::max(0.0, signal - explained(i));
  }
  return out;
}

GpPrediction GpSurrogate::predict(const Eigen::VectorXd& x) const {
  return predict_many(x.transpose()).front();
}

double GpSurrogate::noise_variance() const {
  return ySd_ * ySd_ * (std::exp(hyper_.logNoiseVariance) + jitter_);
}

GpSurrogate gp_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpConfig& config,
                   const GpHyper* warmStart) {
  require(X.rows() >= 2 && y.size() == X.rows(), ErrorKind::Validation, "GP fit needs at least two points");
  require(X.allFinite() && y.allFinite(), ErrorKind::Numerical, "GP data contains non-finite values");
  require(config.iterations >= 0 && config.restarts >= 0 && config.learningRate > 0.0, ErrorKind::Config,
          "invalid GP fit settings");
  const int d = static_cast<int>(X.cols());
  const Standardized s = standardize(y);
  const Priors pri = priors_for(d, config);
  Rng rng(mix_seed(config.seed, 0x6F17));

  std::vector<Eigen::VectorXd> starts;
  if (warmStart && warmStart->logLengthscales.size() == d) starts.push_back(pack(*warmStart));
  const int randomStarts = config.restarts + (starts.empty() ? 1 : 0);
  for (int k = 0; k < randomStarts; ++k) {
    Eigen::VectorXd v(d + 2);
    for (int i = 0; i < d; ++i) v(i) = pri.lengthCentre + 0.5 * rng.normal();
    v(d) = 0.3 * rng.normal();
    v(d + 1) = pri.noiseCentre + rng.normal();
    starts.push_back(v);
  }

  Eigen::VectorXd best;
  double bestScore = -std::numeric_limits<double>::infinity();
  for (Eigen::VectorXd v : starts) {
    clamp_hyper(v, config);
    Adam adam(v.size());
    Eigen::VectorXd g;
    Eigen::VectorXd lastGood = v;
    double score = log_posterior(X, s.y, v, pri, &g);
    for (int it = 0; it < config.iterations && std::isfinite(score); ++it) {
      lastGood = v;
      const Eigen::VectorXd descent = -g;
      adam.step(v, descent, config.learningRate);
      clamp_hyper(v, config);
      score = log_posterior(X, s.y, v, pri, &g);
    }
    if (!std::isfinite(score)) {
      v = lastGood;
      score = log_posterior(X, s.y, v, pri, nullptr);
    }
    if (std::isfinite(score) && score > bestScore) {
      bestScore = score;
      best = v;
    }
  }
  if (best.size() == 0) {
    // every start failed to factor; fall back to a noisy prior and let the
    // surrogate's jitter escalation decide
    best = starts.front();
    best(d + 1) = 0.0;
  }
  return GpSurrogate(X, y, unpack(best));
}

double expected_improvement(double mean, double sd, double best) {
  const double delta = mean - best;
  if (!(sd > 0.0)) return std::max(delta, 0.0);
  const double z = delta / sd;
  return std::max(0.0, sd * normal_pdf(z) + delta * normal_cdf(z));
}

double log_expected_improvement(double mean, double sd, double best) {
  const double delta = mean - best;
  if (!(sd > 0.0)) return delta > 0.0 ? std::log(delta) : -std::numeric_limits<double>::infinity();
  const double z = delta / sd;
  if (z > -25.0) {
    const double h = normal_pdf(z) + z * normal_cdf(z);
    if (h > 0.0) return std::log(sd) + std::log(h);
  }
  // phi(z) (1/x^2 - 3/x^4 + 15/x^6 - 105/x^8 + 945/x^10), x = -z
  const double x2 = z * z;
  const double inv = 1.0 / x2;
  const double series = inv * (1.0 - inv * (3.0 - inv * (15.0 - inv * (105.0 - inv * 945.0))));
  return std::log(sd) - 0.5 * x2 - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double expected_improvement(const GpSurrogate& gp, const Eigen::VectorXd& x, double best) {
  const GpPrediction p = gp.predict(x);
  return expected_improvement(p.mean, std::sqrt(p.variance), best);
}

namespace {

DeploymentLedger fresh_ledger(const WorldModel& world) {
  return DeploymentLedger(world.world.catalog, world.roadStats, world.world.network.segments().size());
}

} // namespace

ActionPlan project_plan(const ActionPlan& plan, const WorldModel& world, int startYear) {
  require(plan.zones == world.zone_count(), ErrorKind::Validation, "plan zone count differs from the world");
  ActionPlan out = plan;
  DeploymentLedger ledger = fresh_ledger(world);
  for (int y = 0; y < plan.years; ++y) {
    for (int z = 0; z < plan.zones; ++z) {
      int& a = out.at(z, y);
      require(a >= 0 && a < kActionCount, ErrorKind::Validation, "plan action out of range");
      if (a == 0) continue;
      if (!ledger.action_mask(z)[a]) {
        a = 0;
      } else {
        ledger.deploy(z, static_cast<MeasureId>(a), startYear + y);
      }
    }
    ledger.advance_year(startYear + y);
  }
  return out;
}

ActionPlan random_feasible_plan(const WorldModel& world, int startYear, int years, Rng& rng) {
  ActionPlan plan(world.zone_count(), years);
  DeploymentLedger ledger = fresh_ledger(world);
  for (int y = 0; y < years; ++y) {
    for (int z = 0; z < plan.zones; ++z) {
      const ActionMask mask = ledger.action_mask(z);
      std::vector<int> allowed;
      for (int a = 0; a < kActionCount; ++a) {
        if (mask[a]) allowed.push_back(a);
      }
      const int a = allowed[rng.below(allowed.size())];
      plan.at(z, y) = a;
      if (a != 0) ledger.deploy(z, static_cast<MeasureId>(a), startYear + y);
    }
    ledger.advance_year(startYear + y);
  }
  return plan;
}

double evaluate_plan(const ActionPlan& plan, std::shared_ptr<const WorldModel> world, const EnvConfig& config,
                     const std::vector<std::uint64_t>& seeds) {
  require(!seeds.empty(), ErrorKind::Validation, "plan evaluation needs at least one seed");
  require(plan.years == config.horizon(), ErrorKind::Validation, "plan length differs from the horizon");
  FloodEnv env(std::move(world), config);
  require(plan.zones == env.zone_count(), ErrorKind::Validation, "plan zone count differs from the world");
  double total = 0.0;
  std::vector<int> actions(plan.zones);
  for (std::uint64_t seed : seeds) {
    env.reset(seed);
    for (int y = 0; y < plan.years; ++y) {
      for (int z = 0; z < plan.zones; ++z) actions[z] = plan.at(z, y);
      total += env.step(actions).reward;
    }
  }
  return total / static_cast<double>(seeds.size());
}

PlanObjective flood_plan_objective(std::shared_ptr<const WorldModel> world, EnvConfig env,
                                   std::vector<std::uint64_t> seeds) {
  env.validate();
  PlanObjective o;
  o.zones = world->zone_count();
  o.years = env.horizon();
  o.project = [world, start = env.startYear](const ActionPlan& p) { return project_plan(p, *world, start); };
  o.evaluate = [world, env, seeds](const ActionPlan& p) { return evaluate_plan(p, world, env, seeds); };
  return o;
}

void BoConfig::validate() const {
  require(initSamples >= 2, ErrorKind::Config, "BO needs at least two initial samples");
  require(convergenceWindow >= 1, ErrorKind::Config, "convergence window must be positive");
  require(relativeTolerance >= 0.0, ErrorKind::Config, "tolerance must be non-negative");
  require(maxIterations >= 0, ErrorKind::Config, "iteration cap must be non-negative");
  require(refitEvery >= 1, ErrorKind::Config, "refit interval must be positive");
  require(randomCandidates >= 1 && refineStarts >= 0, ErrorKind::Config, "invalid acquisition settings");
}

namespace {

struct Acquirer {
  const PlanObjective& objective;
  const BoConfig& config;
  const GpSurrogate& gp;
  const std::unordered_set<std::string>& evaluated;
  double incumbent;
  Rng& rng;
  std::unordered_map<std::string, double> scores;

  double score(const ActionPlan& p) {
    const std::string id = p.id();
    if (evaluated.count(id)) return -std::numeric_limits<double>::infinity();
    auto it = scores.find(id);
    if (it != scores.end()) return it->second;
    const GpPrediction pr = gp.predict(encode_plan(p));
    const double s = log_expected_improvement(pr.mean, std::sqrt(pr.variance), incumbent);
    scores.emplace(id, s);
    return s;
  }

  // Coordinate ascent over cells, one category at a time.
  ActionPlan refine(ActionPlan plan) {
    double current = score(plan);
    std::vector<int> cells(plan.actions.size());
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
    for (int sweep = 0; sweep < 10; ++sweep) {
      bool moved = false;
      for (std::size_t i = cells.size(); i > 1; --i) std::swap(cells[i - 1], cells[rng.below(i)]);
      for (int c : cells) {
        for (int a = 0; a < kActionCount; ++a) {
          if (plan.actions[c] == a) continue;
          ActionPlan trial = plan;
          trial.actions[c] = a;
          trial = objective.project(trial);
          if (trial == plan) continue;
          const double s = score(trial);
          if (s > current) {
            current = s;
            plan = std::move(trial);
            moved = true;
          }
        }
      }
      if (!moved) break;
    }
    return plan;
  }
};

} // namespace

BoResult bo_optimize(const PlanObjective& objective, const BoConfig& config, Rng& rng,
                     const std::function<ActionPlan(Rng&)>& sampler) {
  config.validate();
  require(objective.zones >= 1 && objective.years >= 1, ErrorKind::Validation, "objective has no cells");
  BoResult result;
  std::unordered_set<std::string> evaluated;
  std::vector<ActionPlan> plans;
  std::vector<Eigen::VectorXd> codes;
  std::vector<double> values;

  auto add = [&](const ActionPlan& plan, int iteration) {
    const double v = objective.evaluate(plan);
    require(std::isfinite(v), ErrorKind::Numerical, "plan evaluation returned a non-finite value");
    ++result.evaluations;
    evaluated.insert(plan.id());
    plans.push_back(plan);
    codes.push_back(encode_plan(plan));
    values.push_back(v);
    if (plans.size() == 1 || v > result.bestValue) {
      result.bestValue = v;
      result.best = plan;
    }
    result.history.push_back({iteration, plan.id(), v, result.bestValue});
  };

  int misses = 0;
  while (static_cast<int>(plans.size()) < config.initSamples && misses < 50) {
    const ActionPlan p = objective.project(sampler(rng));
    if (evaluated.count(p.id())) {
      ++misses;
      continue;
    }
    misses = 0;
    add(p, 0);
  }
  if (plans.size() < 2) {
    result.converged = true;
    return result;
  }

  std::vector<double> incumbents{result.bestValue};
  GpHyper hyper;
  bool haveHyper = false;
  for (int it = 1; it <= config.maxIterations; ++it) {
    const Eigen::Index n = static_cast<Eigen::Index>(plans.size());
    Eigen::MatrixXd X(n, codes.front().size());
    for (Eigen::Index i = 0; i < n; ++i) X.row(i) = codes[i].transpose();
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), n);

    std::optional<GpSurrogate> gp;
    if (!haveHyper || (it - 1) % config.refitEvery == 0) {
      GpConfig gc = config.gp;
      gc.seed = mix_seed(config.gp.seed, static_cast<std::uint64_t>(it));
      gp.emplace(gp_fit(X, y, gc, haveHyper ? &hyper : nullptr));
      hyper = gp->hyper();
      haveHyper = true;
    } else {
      gp.emplace(X, y, hyper);
    }

    Acquirer acq{objective, config, *gp, evaluated, result.bestValue, rng, {}};
    std::vector<std::pair<double, ActionPlan>> pool;
    for (int k = 0; k < config.randomCandidates; ++k) {
      ActionPlan p = objective.project(sampler(rng));
      const double s = acq.score(p);
      if (std::isfinite(s)) pool.emplace_back(s, std::move(p));
    }
    std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<ActionPlan> starts{result.best};
    for (int k = 0; k < config.refineStarts && k < static_cast<int>(pool.size()); ++k) starts.push_back(pool[k].second);

    std::optional<ActionPlan> choice;
    double choiceScore = -std::numeric_limits<double>::infinity();
    if (!pool.empty()) {
      choice = pool.front().second;
      choiceScore = pool.front().first;
    }
    for (const ActionPlan& s : starts) {
      ActionPlan r = acq.refine(s);
      const double sc = acq.score(r);
      if (std::isfinite(sc) && sc > choiceScore) {
        choiceScore = sc;
        choice = std::move(r);
      }
    }
    if (!choice) {
      // every candidate was already evaluated; the space may be exhausted
      for (int k = 0; k < 200 && !choice; ++k) {
        ActionPlan p = objective.project(sampler(rng));
        if (!evaluated.count(p.id())) choice = std::move(p);
      }
    }
    if (!choice) {
      result.converged = true;
      break;
    }
    add(*choice, it);
    result.iterations = it;
    incumbents.push_back(result.bestValue);
    if (it >= config.convergenceWindow) {
      const double before = incumbents[static_cast<std::size_t>(it - config.convergenceWindow)];
      const double gain = result.bestValue - before;
      if (gain <= config.relativeTolerance * std::max(std::abs(before), 1e-12)) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

std::string bo_history_line(const BoStep& step) {
  nlohmann::json j{{"iteration", step.iteration},
                   {"plan", step.planId},
                   {"return", step.value},
                   {"incumbent", step.incumbent}};
  return j.dump();
}

} // namespace floodrl
