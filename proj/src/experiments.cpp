#include "floodrl/experiments.hpp"

#include <chrono>
#include <cmath>

namespace floodrl {

namespace {

nlohmann::json components_json(const RewardComponents& c) {
  return {{"I", c.infrastructure}, {"D", c.delay}, {"C", c.cancellation}, {"A", c.implementation},
          {"M", c.maintenance}};
}

nlohmann::json summary_json(const Summary& s) { return {{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}}; }

RewardComponents scaled(const RewardComponents& c, double k) {
  return {c.infrastructure * k, c.delay * k, c.cancellation * k, c.implementation * k, c.maintenance * k};
}

} // namespace

std::vector<int> random_actions(std::span<const ActionMask> masks, Rng& rng) {
  std::vector<int> out(masks.size());
  std::array<int, kActionCount> allowed{};
  for (std::size_t z = 0; z < masks.size(); ++z) {
    int n = 0;
    for (int a = 0; a < kActionCount; ++a) {
      if (masks[z][a]) allowed[n++] = a;
    }
    require(n > 0, ErrorKind::Contract, "zone " + std::to_string(z) + " has no allowed action");
    out[z] = allowed[rng.below(static_cast<std::uint64_t>(n))];
  }
  return out;
}

std::string to_string(PolicyKind k) {
  switch (k) {
  case PolicyKind::NoControl: return "NC";
  case PolicyKind::Random: return "RND";
  case PolicyKind::TrainedRL: return "RL";
  case PolicyKind::BoPlan: return "BO";
  case PolicyKind::Scripted: return "scripted";
  }
  return "?";
}

void PolicySpec::validate() const {
  const bool needsParams = kind == PolicyKind::TrainedRL;
  const bool needsPlan = kind == PolicyKind::BoPlan;
  const bool needsScript = kind == PolicyKind::Scripted;
  require(needsParams == static_cast<bool>(params), ErrorKind::Config,
          needsParams ? "RL policy needs a checkpoint" : to_string(kind) + " policy takes no checkpoint");
  require(needsPlan == plan.has_value(), ErrorKind::Config,
          needsPlan ? "BO policy needs a plan" : to_string(kind) + " policy takes no plan");
  require(needsScript == !script.empty(), ErrorKind::Config,
          needsScript ? "scripted policy needs a trace" : to_string(kind) + " policy takes no trace");
}

PolicySpec PolicySpec::no_control() { return PolicySpec{PolicyKind::NoControl, "NC", nullptr, false, {}, {}}; }
PolicySpec PolicySpec::random() { return PolicySpec{PolicyKind::Random, "RND", nullptr, false, {}, {}}; }

PolicySpec PolicySpec::trained(std::shared_ptr<const PolicyParams> params, bool sample) {
  return PolicySpec{PolicyKind::TrainedRL, "RL", std::move(params), sample, {}, {}};
}

PolicySpec PolicySpec::checkpoint(const std::filesystem::path& path, bool sample) {
  return trained(std::make_shared<PolicyParams>(load_policy(path)), sample);
}

PolicySpec PolicySpec::bo_plan(ActionPlan plan) {
  return PolicySpec{PolicyKind::BoPlan, "BO", nullptr, false, std::move(plan), {}};
}

PolicySpec PolicySpec::scripted(std::vector<std::vector<int>> script) {
  return PolicySpec{PolicyKind::Scripted, "scripted", nullptr, false, {}, std::move(script)};
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= s.n;
  if (s.n > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(sq / (s.n - 1));
  }
  return s;
}

std::vector<std::uint64_t> default_eval_seeds(int n) {
  std::vector<std::uint64_t> out;
  for (int i = 1; i <= n; ++i) out.push_back(static_cast<std::uint64_t>(i));
  return out;
}

RunReport run_policy(std::shared_ptr<const WorldModel> world, const EnvConfig& config, const PolicySpec& spec,
                     std::span<const std::uint64_t> seeds) {
  spec.validate();
  require(!seeds.empty(), ErrorKind::Validation, "evaluation needs at least one seed");
  FloodEnv env(world, config);
  const int zones = env.zone_count();
  const int horizon = config.horizon();

  std::shared_ptr<const Eigen::MatrixXd> adjacency;
  if (spec.kind == PolicyKind::TrainedRL) {
    require(spec.params->input_dim() == kPolicyInputDim, ErrorKind::Config,
            "checkpoint expects " + std::to_string(spec.params->input_dim()) + " inputs per zone, env provides " +
                std::to_string(kPolicyInputDim));
    adjacency = std::make_shared<Eigen::MatrixXd>(normalized_adjacency(world->graph));
  }
  if (spec.plan) {
    require(spec.plan->zones == zones && spec.plan->years == horizon, ErrorKind::Config,
            "plan is " + std::to_string(spec.plan->zones) + "x" + std::to_string(spec.plan->years) +
                " but the env is " + std::to_string(zones) + "x" + std::to_string(horizon));
  }
  if (spec.kind == PolicyKind::Scripted) {
    require(static_cast<int>(spec.script.size()) >= horizon, ErrorKind::Config,
            "script is shorter than the horizon");
    for (const auto& row : spec.script) {
      require(static_cast<int>(row.size()) == zones, ErrorKind::Config, "script row has the wrong zone count");
    }
  }

  RunReport report;
  report.label = spec.label.empty() ? to_string(spec.kind) : spec.label;
  report.scenario = config.scenario;
  std::vector<double> totals;
  for (std::uint64_t seed : seeds) {
    env.reset(seed);
    Rng rng(mix_seed(seed, 0x52AD));
    SeedRun run;
    run.seed = seed;
    double discount = 1.0;
    for (int t = 0; !env.done(); ++t) {
      std::vector<int> actions(zones, 0);
      switch (spec.kind) {
      case PolicyKind::NoControl: break;
      case PolicyKind::Random: actions = random_actions(env.masks(), rng); break;
      case PolicyKind::TrainedRL: {
        const Observation o = observe_env(env, adjacency);
        const PolicyOutput out = evaluate(*spec.params, *o.adjacency, o.features, o.masks);
        actions = spec.sampleActions ? sample(out.dist, rng).actions : greedy(out.dist);
        break;
      }
      case PolicyKind::BoPlan:
        for (int z = 0; z < zones; ++z) actions[z] = spec.plan->at(z, t);
        break;
      case PolicyKind::Scripted: actions = spec.script[t]; break;
      }
      const StepResult r = env.step(actions);
      run.steps.push_back({r.year, r.event.depth_mm, r.actions, r.components, r.reward});
      run.totals += r.components;
      run.cumulativeReward += r.reward;
      run.discountedReturn += discount * r.reward;
      discount *= config.gamma;
    }
    totals.push_back(run.cumulativeReward);
    report.meanTotals += run.totals;
    report.runs.push_back(std::move(run));
  }
  report.meanTotals = scaled(report.meanTotals, 1.0 / static_cast<double>(seeds.size()));
  report.cumulative = summarize(totals);
  return report;
}

nlohmann::json report_json(const RunReport& r, bool withSteps) {
  nlohmann::json runs = nlohmann::json::array();
  for (const SeedRun& s : r.runs) {
    nlohmann::json j{{"seed", s.seed},
                     {"cumulative", s.cumulativeReward},
                     {"discounted", s.discountedReturn},
                     {"totals", components_json(s.totals)}};
    if (withSteps) {
      nlohmann::json steps = nlohmann::json::array();
      for (const StepRecord& st : s.steps) {
        nlohmann::json row = components_json(st.components);
        row["year"] = st.year;
        row["rain_mm"] = st.rain_mm;
        row["actions"] = st.actions;
        row["reward"] = st.reward;
        steps.push_back(std::move(row));
      }
      j["steps"] = std::move(steps);
    }
    runs.push_back(std::move(j));
  }
  return {{"policy", r.label},
          {"scenario", to_string(r.scenario)},
          {"cumulative", summary_json(r.cumulative)},
          {"meanTotals", components_json(r.meanTotals)},
          {"runs", std::move(runs)}};
}

PolicyParams train_flood_policy(std::shared_ptr<const WorldModel> world, const EnvConfig& env, const PpoConfig& ppo,
                                TrainResult* result,
                                const std::function<void(const PpoTrainer&, const CurvePoint&)>& on_update) {
  PpoTrainer trainer(ppo, [world, env](int) { return std::make_unique<FloodRlEnv>(world, env); });
  TrainResult r = trainer.train(on_update);
  if (result) *result = std::move(r);
  return trainer.params();
}

CrossMatrix cross_scenario_matrix(std::shared_ptr<const WorldModel> world, const EnvConfig& base,
                                  const std::map<RcpScenario, PolicySpec>& beliefs,
                                  std::span<const std::uint64_t> seeds) {
  CrossMatrix m;
  for (RcpScenario b : m.beliefs) {
    require(beliefs.count(b) > 0, ErrorKind::Config, "missing belief policy for " + to_string(b));
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EnvConfig cfg = base;
      cfg.scenario = m.realities[j];
      m.cells[i][j] = run_policy(world, cfg, beliefs.at(m.beliefs[i]), seeds).cumulative;
    }
  }
  return m;
}

bool row_nonincreasing(const CrossMatrix& m, int belief) {
  require(belief >= 0 && belief < 3, ErrorKind::Validation, "belief row out of range");
  const auto& row = m.cells[belief];
  for (int j = 0; j + 1 < 3; ++j) {
    const double slack = std::max(row[j].sd, row[j + 1].sd);
    if (row[j + 1].mean > row[j].mean + slack) return false;
  }
  return true;
}

nlohmann::json matrix_json(const CrossMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    nlohmann::json cells = nlohmann::json::object();
    for (int j = 0; j < 3; ++j) cells[to_string(m.realities[j])] = summary_json(m.cells[i][j]);
    rows.push_back({{"belief", to_string(m.beliefs[i])}, {"reality", cells}, {"nonincreasing", row_nonincreasing(m, i)}});
  }
  return {{"rows", rows}};
}

void ReducedConfig::validate() const {
  require(zones >= 1 && years >= 1, ErrorKind::Config, "reduced instance needs zones and years");
  require(runs >= 1 && evalSeeds >= 1 && boEvalSeeds >= 1, ErrorKind::Config, "reduced run counts must be positive");
  require(rewardScale > 0.0, ErrorKind::Config, "reward scale must be positive");
  ppo.validate();
  bo.validate();
}

ReducedConfig reduced_preset(char kind) {
  ReducedConfig c;
  c.ppo.parallelEnvs = 4;
  c.ppo.stepsPerUpdate = 128;
  c.ppo.batchSize = 64;
  c.ppo.maxSteps = 120'000;
  c.ppo.hidden = 32;
  c.ppo.learningRate = 1e-3;
  c.ppo.annealLearningRate = true;
  c.ppo.entropyCoef = 0.005;
  c.bo.initSamples = 100;
  c.bo.convergenceWindow = 50;
  c.bo.maxIterations = 200;
  c.bo.randomCandidates = 256;
  c.bo.refineStarts = 3;
  switch (kind) {
  case 'A': case 'a': break;
  case 'B': case 'b':
    c.zones = 6;
    c.years = 10;
    c.trips = 180;
    break;
  default: fail(ErrorKind::Config, std::string("unknown reduced experiment '") + kind + "', expected A or B");
  }
  return c;
}

ReducedTable reduced_experiment(const ReducedConfig& config, std::span<const RcpScenario> scenarios,
                                const std::function<void(const std::string&)>& log) {
  config.validate();
  SynthOptions o;
  o.zones = config.zones;
  o.trips = config.trips;
  o.seed = config.worldSeed;
  auto world = std::make_shared<const WorldModel>(synth_world(o, "reduced"));

  std::vector<std::uint64_t> evalSeeds;
  for (int k = 0; k < config.evalSeeds; ++k) evalSeeds.push_back(1000 + static_cast<std::uint64_t>(k));

  ReducedTable table;
  table.zones = config.zones;
  table.years = config.years;
  for (RcpScenario sc : scenarios) {
    const auto start = std::chrono::steady_clock::now();
    EnvConfig ec;
    ec.scenario = sc;
    ec.endYear = ec.startYear + config.years - 1;
    ec.rewardScale = config.rewardScale;
    ReducedRow row;
    row.scenario = sc;
    for (int r = 0; r < config.runs; ++r) {
      const std::uint64_t runSeed = mix_seed(static_cast<std::uint64_t>(sc) + 1, static_cast<std::uint64_t>(r));

      PpoConfig p = config.ppo;
      p.seed = runSeed;
      const auto params = std::make_shared<const PolicyParams>(train_flood_policy(world, ec, p));
      row.rlRuns.push_back(run_policy(world, ec, PolicySpec::trained(params), evalSeeds).cumulative.mean);

      std::vector<std::uint64_t> boSeeds;
      for (int k = 0; k < config.boEvalSeeds; ++k) boSeeds.push_back(mix_seed(runSeed, 0xB0 + k));
      const PlanObjective objective = flood_plan_objective(world, ec, boSeeds);
      BoConfig b = config.bo;
      b.gp.seed = runSeed;
      Rng rng(mix_seed(runSeed, 0xB05));
      const BoResult res = bo_optimize(objective, b, rng, [&](Rng& g) {
        return random_feasible_plan(*world, ec.startYear, config.years, g);
      });
      row.boRuns.push_back(run_policy(world, ec, PolicySpec::bo_plan(res.best), evalSeeds).cumulative.mean);
      row.boPlans.push_back(res.best);
      if (log) {
        log(to_string(sc) + " run " + std::to_string(r + 1) + ": RL " + std::to_string(row.rlRuns.back()) +
            ", BO " + std::to_string(row.boRuns.back()) + " after " + std::to_string(res.evaluations) +
            " evaluations");
      }
    }
    row.rl = summarize(row.rlRuns);
    row.bo = summarize(row.boRuns);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    table.rows.push_back(std::move(row));
  }
  return table;
}

nlohmann::json reduced_json(const ReducedTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ReducedRow& r : t.rows) {
    nlohmann::json plans = nlohmann::json::array();
    for (const ActionPlan& p : r.boPlans) plans.push_back(p.id());
    rows.push_back({{"scenario", to_string(r.scenario)},
                    {"RL", summary_json(r.rl)},
                    {"BO", summary_json(r.bo)},
                    {"RLruns", r.rlRuns},
                    {"BOruns", r.boRuns},
                    {"BOplans", plans},
                    {"seconds", r.seconds}});
  }
  return {{"zones", t.zones}, {"years", t.years}, {"rows", rows}};
}

PathwayReport pathway_report(std::span<const StepRecord> steps, int zones, int expectedSteps) {
  require(zones >= 1, ErrorKind::Validation, "pathway report needs at least one zone");
  PathwayReport p;
  p.zones = zones;
  p.years = static_cast<int>(steps.size());
  p.truncated = expectedSteps >= 0 && static_cast<int>(steps.size()) < expectedSteps;
  int total = 0;
  for (const StepRecord& s : steps) {
    require(static_cast<int>(s.actions.size()) == zones, ErrorKind::Validation,
            "trajectory row for " + std::to_string(s.year) + " has the wrong zone count");
    for (int z = 0; z < zones; ++z) {
      const int a = s.actions[z];
      require(a >= 0 && a < kActionCount, ErrorKind::Validation, "action id out of range");
      if (a == 0) continue;
      p.raster.push_back({z, s.year, static_cast<MeasureId>(a)});
      ++p.counts[a - 1];
      ++total;
    }
  }
  if (total > 0) {
    for (int m = 0; m < kPhysicalMeasureCount; ++m) p.shares[m] = static_cast<double>(p.counts[m]) / total;
  }
  return p;
}

nlohmann::json pathway_json(const PathwayReport& p) {
  nlohmann::json raster = nlohmann::json::array();
  for (const auto& e : p.raster) raster.push_back({{"zone", e.zone}, {"year", e.year}, {"measure", to_string(e.measure)}});
  nlohmann::json shares = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  for (int m = 0; m < kPhysicalMeasureCount; ++m) {
    const std::string name(to_string(static_cast<MeasureId>(m + 1)));
    shares[name] = p.shares[m];
    counts[name] = p.counts[m];
  }
  return {{"zones", p.zones}, {"years", p.years}, {"truncated", p.truncated},
          {"raster", raster}, {"counts", counts}, {"shares", shares}};
}

} // namespace floodrl
