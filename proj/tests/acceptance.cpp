// Acceptance suite: one PASS/FAIL line per top-level criterion.
//
//   acceptance            run everything
//   acceptance NAME...    run only the named checks (see kChecks)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "toy_envs.hpp"

#include "floodrl/bayesopt.hpp"
#include "floodrl/experiments.hpp"

using namespace floodrl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Shared training for the ordering and cross-scenario checks.

std::shared_ptr<const WorldModel> shipped_world() {
  static auto w = std::make_shared<const WorldModel>(synth_world(SynthOptions{}));
  return w;
}

EnvConfig eval_env(RcpScenario s) {
  EnvConfig e;
  e.scenario = s;
  e.rewardScale = 1e-7;
  return e;
}

PpoConfig ordering_ppo(RcpScenario s) {
  PpoConfig p;
  p.parallelEnvs = 4;
  p.stepsPerUpdate = 512;
  p.maxSteps = 150'000;
  p.hidden = 64;
  p.seed = mix_seed(0xACCE, static_cast<std::uint64_t>(s));
  return p;
}

std::map<RcpScenario, std::shared_ptr<const PolicyParams>>& trained_cache() {
  static std::map<RcpScenario, std::shared_ptr<const PolicyParams>> cache;
  return cache;
}

std::shared_ptr<const PolicyParams> belief_policy(RcpScenario s) {
  auto& cache = trained_cache();
  if (auto it = cache.find(s); it != cache.end()) return it->second;
  const auto t0 = Clock::now();
  TrainResult r;
  auto p = std::make_shared<const PolicyParams>(train_flood_policy(shipped_world(), eval_env(s), ordering_ppo(s), &r));
  std::cerr << "  trained " << to_string(s) << " policy: " << r.steps << " steps, " << fmt(seconds_since(t0), 3)
            << " s\n";
  cache[s] = p;
  return p;
}

// ---------------------------------------------------------------------------

Outcome policy_ordering() {
  const auto t0 = Clock::now();
  const auto world = shipped_world();
  const EnvConfig env = eval_env(RcpScenario::RCP45);
  const auto seeds = default_eval_seeds(10);
  const RunReport rl = run_policy(world, env, PolicySpec::trained(belief_policy(RcpScenario::RCP45)), seeds);
  const RunReport nc = run_policy(world, env, PolicySpec::no_control(), seeds);
  const RunReport rnd = run_policy(world, env, PolicySpec::random(), seeds);
  int strict = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const double r = rl.runs[i].cumulativeReward;
    if (r > nc.runs[i].cumulativeReward && r > rnd.runs[i].cumulativeReward) ++strict;
  }
  const bool meanOrder = rl.cumulative.mean > nc.cumulative.mean && rl.cumulative.mean > rnd.cumulative.mean;
  const double secs = seconds_since(t0);
  return {meanOrder && strict >= 8,
          world->zone_count() == 12 ? "12 zones, RCP45, mean RL " + fmt(rl.cumulative.mean) + " NC " +
                                          fmt(nc.cumulative.mean) + " RND " + fmt(rnd.cumulative.mean) +
                                          "; strict in " + std::to_string(strict) + "/10 seeds; " +
                                          std::to_string(ordering_ppo(RcpScenario::RCP45).maxSteps) +
                                          " training steps; " + fmt(secs, 3) + " s"
                                    : "unexpected world size"};
}

Outcome rl_vs_bo() {
  const auto t0 = Clock::now();
  const ReducedConfig cfg = reduced_preset('A');
  const ReducedTable t = reduced_experiment(cfg, kAllScenarios, [](const std::string& line) {
    std::cerr << "  " << line << "\n";
  });
  bool ok = t.zones * t.years * kActionCount <= 160;
  std::string detail = std::to_string(t.zones) + " zones x " + std::to_string(t.years) + " years, " +
                       std::to_string(cfg.runs) + " runs;";
  for (const ReducedRow& row : t.rows) {
    ok = ok && row.rl.mean >= row.bo.mean;
    detail += " " + to_string(row.scenario) + " RL " + fmt(row.rl.mean, 6) + " BO " + fmt(row.bo.mean, 6) + ";";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs <= 20 * 60;
  return {ok, detail + " " + fmt(secs, 3) + " s"};
}

Outcome cross_scenario() {
  std::map<RcpScenario, PolicySpec> beliefs;
  for (RcpScenario s : kAllScenarios) beliefs[s] = PolicySpec::trained(belief_policy(s));
  const CrossMatrix m =
      cross_scenario_matrix(shipped_world(), eval_env(RcpScenario::RCP45), beliefs, default_eval_seeds(10));
  bool ok = true;
  std::string detail;
  for (int b = 0; b < 3; ++b) {
    const bool row = row_nonincreasing(m, b);
    ok = ok && row;
    detail += to_string(m.beliefs[b]) + " [";
    for (int r = 0; r < 3; ++r) detail += (r ? ", " : "") + fmt(m.cells[b][r].mean);
    detail += row ? "] " : "] (rises) ";
  }
  return {ok, detail};
}

TerrainGrid random_grid(Rng& rng, int w, int h) {
  TerrainGrid g;
  g.width = w;
  g.height = h;
  g.cellArea_m2 = 0.5 + 4.0 * rng.uniform();
  for (int i = 0; i < w * h; ++i) {
    g.elevation_m.push_back(3.0 * rng.uniform());
    g.zoneOf.push_back(static_cast<int>(rng.below(3)));
  }
  return g;
}

Outcome flood_conservation() {
  Rng rng(913);
  double worstBalance = 0.0;
  double worstDepth = 0.0;
  int oracleGrids = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 2 + static_cast<int>(rng.below(7));
    const int h = 2 + static_cast<int>(rng.below(7));
    TerrainGrid g = random_grid(rng, w, h);
    if (trial % 5 == 0) g.zoneOf[rng.below(g.cell_count())] = TerrainGrid::kOutletZone;
    const double mm = 1500.0 * rng.uniform();

    // conservation with zone captures
    std::vector<double> capture{rng.uniform() * 5.0, 0.0, rng.uniform() * 50.0};
    const FloodField fc = simulate_flood(g, RainEvent{2050, mm}, capture);
    const double balance = fc.stored_m3(g.cellArea_m2) + fc.outflow_m3;
    const double rel = std::abs(balance - fc.input_m3) / std::max(fc.input_m3, 1e-300);
    worstBalance = std::max(worstBalance, fc.input_m3 > 0.0 ? rel : std::abs(balance));

    // fill-spill against the global oracle
    const FloodField f = simulate_flood(g, RainEvent{2050, mm});
    std::vector<bool> border(g.cell_count()), sink(g.cell_count());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) border[y * w + x] = x == 0 || y == 0 || x == w - 1 || y == h - 1;
    for (std::size_t i = 0; i < sink.size(); ++i) sink[i] = g.zoneOf[i] == TerrainGrid::kOutletZone;
    std::vector<double> rain(g.cell_count(), mm / 1000.0 * g.cellArea_m2);
    const auto ref = oracle::pour_fill(w, h, g.cellArea_m2, g.elevation_m, border, sink, rain);
    for (std::size_t i = 0; i < rain.size(); ++i) worstDepth = std::max(worstDepth, std::abs(f.depth_m[i] - ref.depth_m[i]));
    ++oracleGrids;
  }
  return {worstBalance <= 1e-9 && worstDepth <= 1e-6,
          "200 grids up to 8x8: worst relative balance error " + fmt(worstBalance, 3) + ", worst depth gap vs oracle " +
              fmt(worstDepth, 3) + " m over " + std::to_string(oracleGrids) + " grids"};
}

Outcome routing_optimality() {
  Rng rng(4242);
  int exact = 0, cancelledAgree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    std::vector<NetworkNode> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back({i, 10.0 * i, 0.0, 0});
    std::vector<Segment> segs;
    for (int k = 0; k < 3 * n; ++k) {
      const int a = static_cast<int>(rng.below(n));
      int b = static_cast<int>(rng.below(n));
      if (a == b) b = (b + 1) % n;
      Segment s;
      s.id = static_cast<int>(segs.size());
      s.from = a;
      s.to = b;
      s.mode = Mode::Car;
      s.length_m = 50 + 950 * rng.uniform();
      s.maxSpeed_kmh = 20 + 60 * rng.uniform();
      s.surfaceArea_m2 = s.length_m * 6;
      s.roadClass = "residential";
      segs.push_back(s);
    }
    const TransportNetwork net(nodes, segs);
    std::vector<double> depths(segs.size());
    for (double& d : depths) d = rng.uniform() < 0.3 ? 0.4 * rng.uniform() : 0.0;
    std::vector<oracle::Edge> edges;
    for (const Segment& s : segs) {
      const double v = disrupted_speed(Mode::Car, s.maxSpeed_kmh, depths[s.id]);
      // same per-edge hours as the router, so the enumeration compares paths, not roundings
      if (v > 0.0) edges.push_back({s.from, s.to, s.length_m / (1000.0 * v)});
    }
    Trip t;
    t.mode = Mode::Car;
    t.originNode = static_cast<int>(rng.below(n));
    t.destinationNode = static_cast<int>(rng.below(n));
    const TripOutcome got = route_trip(net, t, depths);
    const double want = t.originNode == t.destinationNode ? 0.0 : oracle::enumerate_shortest(n, edges, t.originNode, t.destinationNode);
    if (want < 0.0) {
      if (got.status == TripStatus::Cancelled) ++cancelledAgree;
    } else if (got.status == TripStatus::Completed && got.time_h == want) {
      ++exact;
    }
  }
  return {exact + cancelledAgree == 100, std::to_string(exact) + " exact shortest times + " +
                                             std::to_string(cancelledAgree) + " agreed cancellations of 100 graphs"};
}

Outcome reward_identity() {
  SynthOptions o;
  o.zones = 12;
  o.trips = 200;
  o.seed = 3;
  const auto world = std::make_shared<const WorldModel>(synth_world(o));
  const EnvConfig env = eval_env(RcpScenario::RCP85);
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  long steps = 0, violations = 0, ncCostSteps = 0;
  double totalA = 0.0;
  for (const PolicySpec& spec : {PolicySpec::random(), PolicySpec::no_control()}) {
    const RunReport r = run_policy(world, env, spec, seeds);
    for (const SeedRun& run : r.runs) {
      for (const StepRecord& s : run.steps) {
        const RewardComponents& c = s.components;
        ++steps;
        if (s.reward + (c.infrastructure + c.delay + c.cancellation + c.implementation + c.maintenance) != 0.0)
          ++violations;
        if (spec.kind == PolicyKind::NoControl && (c.implementation != 0.0 || c.maintenance != 0.0)) ++ncCostSteps;
        if (spec.kind == PolicyKind::Random) totalA += c.implementation;
      }
    }
  }
  return {violations == 0 && ncCostSteps == 0 && totalA > 0.0 && steps == 2 * 3 * 77,
          std::to_string(steps) + " steps (RND and NC, 3 seeds each): " + std::to_string(violations) +
              " identity violations, " + std::to_string(ncCostSteps) + " NC steps with A or M"};
}

Outcome speed_anchors() {
  struct Anchor {
    Mode mode;
    double maxSpeed, cutoff;
  };
  const Anchor anchors[] = {{Mode::Car, 50.0, 0.30}, {Mode::Bicycle, kBicycleMaxSpeed_kmh, 0.20},
                            {Mode::Walk, kWalkMaxSpeed_kmh, 1.50}};
  bool ok = true;
  Rng rng(77);
  int checked = 0;
  for (const Anchor& a : anchors) {
    ok = ok && disrupted_speed(a.mode, a.maxSpeed, 0.0) == a.maxSpeed;
    ok = ok && disrupted_speed(a.mode, a.maxSpeed, a.cutoff) == 0.0;
    std::vector<double> depths(1000);
    for (double& d : depths) d = 2.0 * a.cutoff * rng.uniform();
    std::sort(depths.begin(), depths.end());
    const double slope = a.maxSpeed / a.cutoff;
    for (std::size_t i = 0; i < depths.size(); ++i) {
      const double v = disrupted_speed(a.mode, a.maxSpeed, depths[i]);
      ok = ok && v >= 0.0 && v <= a.maxSpeed;
      if (i > 0) ok = ok && v <= disrupted_speed(a.mode, a.maxSpeed, depths[i - 1]);
      if (depths[i] + 1e-7 < a.cutoff) {
        // Lipschitz with the linear slope just below the cutoff
        const double step = disrupted_speed(a.mode, a.maxSpeed, depths[i] + 1e-7) - v;
        ok = ok && std::abs(step) <= slope * 1e-7 * (1.0 + 1e-6) + 1e-12;
      } else if (depths[i] >= a.cutoff) {
        ok = ok && v == 0.0;
      }
      ++checked;
    }
  }
  return {ok, "car/bicycle/walk anchors at 0, 0.30, 0.20, 1.50 m; " + std::to_string(checked) +
                  " random depths monotone and continuous"};
}

Outcome measure_fidelity() {
  // One 90 m street (both directions, 6 m wide) in zone 0.
  std::vector<NetworkNode> nodes{{0, 0, 0, 0}, {1, 90, 0, 0}};
  std::vector<Segment> segs;
  for (auto [f, t] : {std::pair{0, 1}, std::pair{1, 0}}) {
    Segment s;
    s.id = static_cast<int>(segs.size());
    s.from = f;
    s.to = t;
    s.mode = Mode::Car;
    s.length_m = 90;
    s.maxSpeed_kmh = 50;
    s.surfaceArea_m2 = 540;
    s.roadClass = "residential";
    segs.push_back(s);
  }
  const TransportNetwork net(nodes, segs);

  struct Row {
    MeasureId id;
    double units, impl, maint, effect;
    int lifetime;
  };
  // published per-unit rates; units: 3 planters (one per 30 m), 1 road, 540 m2
  const Row rows[] = {
      {MeasureId::BioretentionPlanters, 3, 14312, 24, 2 * 3, 40},
      {MeasureId::Soakaway, 1, 7273, 1.9, 5.4, 30},
      {MeasureId::StorageTank, 1, 104896, 5, 15, 50},
      {MeasureId::PorousAsphalt, 540, 995.77, 0.635, 0.3, 30},
      {MeasureId::PerviousConcrete, 540, 1199.81, 0.635, 0.45, 30},
      {MeasureId::PICP, 540, 1046.78, 5.195, 0.25, 50},
      {MeasureId::GridPavers, 540, 1097.79, 5.195, 0.2, 30},
  };
  int fields = 0, matched = 0;
  std::string misses;
  auto check = [&](bool good, const std::string& what) {
    ++fields;
    if (good)
      ++matched;
    else
      misses += " " + what;
  };
  for (const Row& row : rows) {
    const std::string name(to_string(row.id));
    DeploymentLedger ledger(default_catalog(), zone_road_stats(net, 1), net.segments().size());
    const double cost = ledger.deploy(0, row.id, 2024);
    check(cost == row.units * row.impl, name + ".cost");
    const YearAccounting first = ledger.advance_year(2024);
    check(first.maintenance_dkk[0] == row.units * row.maint, name + ".maintenance");
    const int m = static_cast<int>(row.id) - 1;
    const bool volume = row.id == MeasureId::BioretentionPlanters || row.id == MeasureId::Soakaway ||
                        row.id == MeasureId::StorageTank;
    const double effect = volume ? first.captureVolume_m3[0] : first.captureDepth_m[0];
    check(effect == row.effect && first.status[m] == row.effect, name + ".effect");
    bool alive = true;
    for (int y = 2025; y < 2024 + row.lifetime; ++y) {
      ledger.advance_year(y);
      alive = alive && !ledger.active().empty();
    }
    ledger.advance_year(2024 + row.lifetime);
    check(alive && ledger.active().empty() && ledger.action_mask(0)[static_cast<int>(row.id)], name + ".lifetime");
  }
  return {matched == fields, std::to_string(matched) + "/" + std::to_string(fields) + " values exact" +
                                 (misses.empty() ? "" : ";" + misses)};
}

ZoneGraph random_graph(int n, Rng& rng) {
  ZoneGraph g;
  g.zones = n;
  for (int i = 1; i < n; ++i) g.edges.emplace_back(static_cast<int>(rng.below(i)), i);
  for (int k = 0; k < n; ++k) {
    const int a = static_cast<int>(rng.below(n));
    const int b = static_cast<int>(rng.below(n));
    if (a != b) g.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

std::vector<ActionMask> random_masks(int n, Rng& rng) {
  std::vector<ActionMask> m(n);
  for (auto& zone : m)
    for (int a = 0; a < kActionCount; ++a) zone[a] = a == 0 || rng.uniform() < 0.6;
  return m;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

Outcome policy_math() {
  // permutation equivariance
  double worstPerm = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    const int n = 10;
    const PolicyParams p = PolicyParams::random(kPolicyInputDim, 32, seed);
    const ZoneGraph g = random_graph(n, rng);
    const Eigen::MatrixXd X = random_matrix(n, kPolicyInputDim, rng);
    const auto masks = random_masks(n, rng);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    ZoneGraph pg;
    pg.zones = n;
    for (auto [a, b] : g.edges) pg.edges.emplace_back(std::min(perm[a], perm[b]), std::max(perm[a], perm[b]));
    Eigen::MatrixXd PX(n, kPolicyInputDim);
    std::vector<ActionMask> pm(n);
    for (int i = 0; i < n; ++i) {
      PX.row(perm[i]) = X.row(i);
      pm[perm[i]] = masks[i];
    }
    const PolicyOutput a = evaluate(p, normalized_adjacency(g), X, masks);
    const PolicyOutput b = evaluate(p, normalized_adjacency(pg), PX, pm);
    for (int i = 0; i < n; ++i)
      worstPerm = std::max(worstPerm, (a.dist.probs.row(i) - b.dist.probs.row(perm[i])).cwiseAbs().maxCoeff());
    worstPerm = std::max(worstPerm, std::abs(a.value - b.value));
  }

  // loss gradient against central differences
  double worstGrad = 0.0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Rng rng(seed);
    PolicyParams p = PolicyParams::random(5, 8, seed);
    p.theta *= 2.0;
    const int graphs = 5;
    std::vector<Eigen::MatrixXd> S, X;
    std::vector<std::vector<ActionMask>> masks;
    std::vector<std::vector<int>> actions(graphs);
    for (int b = 0; b < graphs; ++b) {
      const int n = 2 + static_cast<int>(rng.below(4));
      S.push_back(normalized_adjacency(random_graph(n, rng)));
      X.push_back(random_matrix(n, p.input_dim(), rng));
      masks.push_back(random_masks(n, rng));
    }
    std::vector<GraphInput> inputs;
    std::vector<PpoTarget> targets;
    for (int b = 0; b < graphs; ++b) inputs.push_back({&S[b], &X[b], &masks[b]});
    for (int b = 0; b < graphs; ++b) {
      const PolicyOutput out = evaluate(p, S[b], X[b], masks[b]);
      const JointSample s = sample(out.dist, rng);
      actions[b] = s.actions;
      targets.push_back({&actions[b], s.logProb + 0.3 * rng.normal(), rng.normal(), out.value + rng.normal()});
    }
    const LossCoefficients coef{0.2, 0.05, 0.5};
    Eigen::VectorXd g;
    ppo_loss(p, inputs, targets, coef, &g);
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      PolicyParams plus = p, minus = p;
      plus.theta[k] += h;
      minus.theta[k] -= h;
      const double fd =
          (ppo_loss(plus, inputs, targets, coef, nullptr).total - ppo_loss(minus, inputs, targets, coef, nullptr).total) /
          (2 * h);
      worstGrad = std::max(worstGrad, std::abs(fd - g[k]) / std::max({std::abs(fd), std::abs(g[k]), 1e-6}));
    }
  }

  // bandit sanity
  PpoConfig c;
  c.parallelEnvs = 1;
  c.maxSteps = 50'000 / c.stepsPerUpdate * c.stepsPerUpdate; // whole updates only
  c.seed = 3;
  PpoTrainer tr(c, [](int) { return std::make_unique<toy::BanditEnv>(); });
  const TrainResult r = tr.train();
  toy::BanditEnv env;
  const Observation o = env.reset(0);
  const double pBest = evaluate(tr.params(), *o.adjacency, o.features, o.masks).dist.probs(0, 1);

  return {worstPerm <= 1e-9 && worstGrad < 1e-4 && pBest > 0.9 && r.steps <= 50'000,
          "permutation gap " + fmt(worstPerm, 3) + "; worst gradient relative error " + fmt(worstGrad, 3) +
              " over 3 seeds; bandit best-action probability " + fmt(pBest, 4) + " after " +
              std::to_string(r.steps) + " steps"};
}

Outcome bo_math() {
  Rng rng(2024);
  double worstEi = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double mu = -3.0 + 6.0 * rng.uniform();
    const double sd = 0.01 + 2.99 * rng.uniform();
    const double best = -3.0 + 6.0 * rng.uniform();
    worstEi = std::max(worstEi, std::abs(expected_improvement(mu, sd, best) - oracle::ei_quadrature(-mu, sd, -best)));
  }

  SynthOptions o;
  o.zones = 2;
  o.trips = 40;
  o.seed = 11;
  const auto world = std::make_shared<const WorldModel>(synth_world(o));
  EnvConfig ec;
  ec.endYear = 2025;
  const PlanObjective obj = flood_plan_objective(world, ec, std::vector<std::uint64_t>{101, 102, 103});
  std::map<std::string, double> all;
  ActionPlan p(2, 2);
  for (int code = 0; code < 4096; ++code) {
    int c = code;
    for (int& a : p.actions) {
      a = c % kActionCount;
      c /= kActionCount;
    }
    const ActionPlan q = obj.project(p);
    if (!all.count(q.id())) all[q.id()] = obj.evaluate(q);
  }
  double best = -1e300;
  for (const auto& [id, v] : all) best = std::max(best, v);

  BoConfig cfg;
  cfg.initSamples = 20;
  cfg.convergenceWindow = 60;
  cfg.maxIterations = 150;
  cfg.randomCandidates = 128;
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng r(seed);
    cfg.gp.seed = seed;
    const BoResult res = bo_optimize(obj, cfg, r, [&](Rng& g) { return random_feasible_plan(*world, 2024, 2, g); });
    if (res.bestValue >= best - 1e-9 * std::abs(best)) ++hits;
  }
  return {worstEi < 1e-6 && hits >= 4, "EI vs quadrature worst gap " + fmt(worstEi, 3) + " on 50 posteriors; " +
                                           std::to_string(hits) + "/5 runs found the optimum of " +
                                           std::to_string(all.size()) + " feasible 2x2 plans"};
}

struct Check {
  const char* name;
  const char* title;
  std::function<Outcome()> run;
};

const std::vector<Check> kChecks{
    {"flood", "flood conservation and fill-spill oracle", flood_conservation},
    {"routing", "routing optimality", routing_optimality},
    {"reward", "reward identity", reward_identity},
    {"speed", "speed and cutoff anchors", speed_anchors},
    {"measures", "measure table fidelity", measure_fidelity},
    {"policy", "policy math", policy_math},
    {"bo", "BO math", bo_math},
    {"ordering", "policy ordering RL > NC, RL > RND", policy_ordering},
    {"cross", "cross-scenario monotonicity", cross_scenario},
    {"rlbo", "RL >= BO on the reduced instance", rl_vs_bo},
};

} // namespace

int main(int argc, char** argv) {
  std::vector<std::string> only(argv + 1, argv + argc);
  for (const std::string& name : only) {
    if (std::none_of(kChecks.begin(), kChecks.end(), [&](const Check& c) { return name == c.name; })) {
      std::cerr << "unknown check '" << name << "'; available:";
      for (const Check& c : kChecks) std::cerr << " " << c.name;
      std::cerr << "\n";
      return 1;
    }
  }
  int failed = 0, ran = 0;
  for (const Check& c : kChecks) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    ++ran;
    if (!out.pass) ++failed;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  " << c.title << "  (" << out.detail << ") [" << fmt(seconds_since(t0), 3)
              << " s]" << std::endl;
  }
  std::cout << ran - failed << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
