#include "doctest.h"

#include <cmath>

#include "floodrl/experiments.hpp"

using namespace floodrl;

namespace {

std::shared_ptr<const WorldModel> small_world(int zones = 3) {
  SynthOptions o;
  o.zones = zones;
  o.trips = 60;
  o.seed = 5;
  return std::make_shared<WorldModel>(synth_world(o));
}

EnvConfig short_env(int years = 4) {
  EnvConfig ec;
  ec.endYear = ec.startYear + years - 1;
  return ec;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

} // namespace

TEST_CASE("policy specs need exactly the sources their kind uses") {
  CHECK_NOTHROW(PolicySpec::no_control().validate());
  CHECK_NOTHROW(PolicySpec::random().validate());
  PolicySpec rl = PolicySpec::trained(nullptr);
  CHECK_THROWS_AS(rl.validate(), Error);
  PolicySpec nc = PolicySpec::no_control();
  nc.plan = ActionPlan(1, 1);
  CHECK_THROWS_AS(nc.validate(), Error);
  CHECK_THROWS_AS(PolicySpec::scripted({}).validate(), Error);
  try {
    PolicySpec::trained(nullptr).validate();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
  CHECK_THROWS_AS(PolicySpec::checkpoint("/nonexistent/policy.bin"), Error);
}

TEST_CASE("no control under zero rain costs nothing") {
  EnvConfig ec = short_env();
  ec.fixedRain_mm = 0.0;
  const RunReport r = run_policy(small_world(), ec, PolicySpec::no_control(), kSeeds);
  CHECK(r.cumulative.mean == 0.0);
  CHECK(r.cumulative.sd == 0.0);
  CHECK(r.runs.size() == 3);
}

TEST_CASE("report totals equal the step sums and NC never pays") {
  auto world = small_world();
  for (const PolicySpec& spec : {PolicySpec::no_control(), PolicySpec::random()}) {
    const RunReport r = run_policy(world, short_env(6), spec, kSeeds);
    double grand = 0.0;
    for (const SeedRun& s : r.runs) {
      CHECK(s.steps.size() == 6);
      RewardComponents sum;
      double cumulative = 0.0;
      for (const StepRecord& st : s.steps) {
        sum += st.components;
        cumulative += st.reward;
        CHECK(st.reward == -st.components.total());
        if (spec.kind == PolicyKind::NoControl) {
          CHECK(st.components.implementation == 0.0);
          CHECK(st.components.maintenance == 0.0);
        }
      }
      CHECK(s.cumulativeReward == cumulative);
      CHECK(s.totals.infrastructure == sum.infrastructure);
      CHECK(s.totals.implementation == sum.implementation);
      grand += s.cumulativeReward;
    }
    CHECK(r.cumulative.mean == doctest::Approx(grand / 3).epsilon(1e-12));
  }
}

TEST_CASE("policies share the event stream for a seed") {
  auto world = small_world();
  const RunReport nc = run_policy(world, short_env(), PolicySpec::no_control(), kSeeds);
  const RunReport rnd = run_policy(world, short_env(), PolicySpec::random(), kSeeds);
  for (std::size_t s = 0; s < kSeeds.size(); ++s) {
    for (std::size_t t = 0; t < nc.runs[s].steps.size(); ++t) {
      CHECK(nc.runs[s].steps[t].rain_mm == rnd.runs[s].steps[t].rain_mm);
    }
  }
}

TEST_CASE("random actions collapse to DoNothing when everything else is masked") {
  ActionMask onlyNothing{};
  onlyNothing[0] = true;
  const std::vector<ActionMask> masks(4, onlyNothing);
  Rng rng(3);
  for (int k = 0; k < 20; ++k) CHECK(random_actions(masks, rng) == std::vector<int>(4, 0));

  ActionMask none{};
  CHECK_THROWS_AS(random_actions(std::vector<ActionMask>{none}, rng), Error);

  // uniform over what is allowed
  ActionMask two{};
  two[0] = two[5] = true;
  int fives = 0;
  for (int k = 0; k < 2000; ++k) fives += random_actions(std::vector<ActionMask>{two}, rng)[0] == 5;
  CHECK(std::abs(fives - 1000) < 150);
}

TEST_CASE("a checkpoint with the wrong input width is a config error") {
  auto params = std::make_shared<const PolicyParams>(PolicyParams::random(5, 8, 1));
  try {
    run_policy(small_world(), short_env(), PolicySpec::trained(params), kSeeds);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
  auto good = std::make_shared<const PolicyParams>(PolicyParams::random(kPolicyInputDim, 8, 1));
  const RunReport greedyRun = run_policy(small_world(), short_env(), PolicySpec::trained(good), kSeeds);
  CHECK(greedyRun.runs.size() == 3);
  CHECK_NOTHROW(run_policy(small_world(), short_env(), PolicySpec::trained(good, true), kSeeds));

  CHECK_THROWS_AS(run_policy(small_world(), short_env(), PolicySpec::bo_plan(ActionPlan(3, 2)), kSeeds), Error);
}

TEST_CASE("a BO plan replays its cells") {
  auto world = small_world();
  ActionPlan plan(3, 4);
  plan.at(1, 0) = 2;
  plan.at(2, 3) = 7;
  const RunReport r = run_policy(world, short_env(), PolicySpec::bo_plan(plan), std::vector<std::uint64_t>{7});
  CHECK(r.runs[0].steps[0].actions == std::vector<int>{0, 2, 0});
  CHECK(r.runs[0].steps[3].actions == std::vector<int>{0, 0, 7});
  CHECK(r.cumulative.mean == evaluate_plan(plan, world, short_env(), {7}));
}

TEST_CASE("pathway shares count deployments per measure") {
  auto world = small_world();
  std::vector<std::vector<int>> script(4, std::vector<int>(3, 0));
  script[0] = {2, 2, 3};
  script[2] = {0, 0, 2};
  const RunReport r = run_policy(world, short_env(), PolicySpec::scripted(script), std::vector<std::uint64_t>{1});
  PathwayReport p = pathway_report(r.runs[0].steps, 3, 4);
  CHECK(p.raster.size() == 4);
  CHECK(p.counts[1] == 3);
  CHECK_FALSE(p.truncated);

  std::vector<StepRecord> steps(4);
  for (int t = 0; t < 4; ++t) {
    steps[t].year = 2024 + t;
    steps[t].actions = {0, 0, 0};
  }
  steps[0].actions = {2, 2, 0};
  steps[1].actions = {0, 0, 2};
  steps[2].actions = {0, 3, 0};
  p = pathway_report(steps, 3, 4);
  CHECK(p.counts[1] == 3);
  CHECK(p.counts[2] == 1);
  CHECK(p.shares[1] == 0.75);
  CHECK(p.shares[2] == 0.25);
  double total = 0.0;
  for (double s : p.shares) total += s;
  CHECK(total == 1.0);
  const auto j = pathway_json(p);
  CHECK(j.at("shares").at("Soakaway").get<double>() == 0.75);
  CHECK(j.at("raster").size() == 4);

  for (auto& s : steps) s.actions = {0, 0, 0};
  p = pathway_report(steps, 3, 4);
  CHECK(p.raster.empty());
  for (double s : p.shares) CHECK(s == 0.0);

  p = pathway_report(std::span<const StepRecord>(steps).first(2), 3, 4);
  CHECK(p.truncated);
  CHECK_THROWS_AS(pathway_report(steps, 2), Error);
}

TEST_CASE("cross-scenario matrix needs every belief and orders by severity") {
  auto world = small_world();
  std::map<RcpScenario, PolicySpec> beliefs{{RcpScenario::RCP26, PolicySpec::no_control()},
                                            {RcpScenario::RCP45, PolicySpec::no_control()}};
  try {
    cross_scenario_matrix(world, short_env(), beliefs, kSeeds);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
  beliefs.emplace(RcpScenario::RCP85, PolicySpec::no_control());
  const CrossMatrix m = cross_scenario_matrix(world, short_env(), beliefs, kSeeds);
  for (int i = 0; i < 3; ++i) {
    CHECK(row_nonincreasing(m, i));
    // NC ignores its belief, so every row is the same
    for (int j = 0; j < 3; ++j) CHECK(m.cells[i][j].mean == m.cells[0][j].mean);
    CHECK(m.cells[i][2].mean <= m.cells[i][0].mean);
  }
  CHECK(matrix_json(m).at("rows").size() == 3);

  CrossMatrix rising = m;
  rising.cells[0] = {Summary{-10.0, 0.5, 3}, Summary{-5.0, 0.5, 3}, Summary{-20.0, 0.5, 3}};
  CHECK_FALSE(row_nonincreasing(rising, 0));
  rising.cells[0][1].mean = -9.6; // within one sd
  CHECK(row_nonincreasing(rising, 0));
}

TEST_CASE("summaries use the sample standard deviation") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const Summary s = summarize(v);
  CHECK(s.mean == 2.5);
  CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(summarize(std::vector<double>{7.0}).sd == 0.0);
  const auto seeds = default_eval_seeds();
  CHECK(seeds.size() == 10);
  CHECK(seeds.front() == 1);
}

TEST_CASE("report JSON carries the summary and optional steps") {
  const RunReport r = run_policy(small_world(), short_env(), PolicySpec::random(), kSeeds);
  const auto j = report_json(r, true);
  CHECK(j.at("policy") == "RND");
  CHECK(j.at("scenario") == "RCP45");
  CHECK(j.at("runs").size() == 3);
  CHECK(j.at("runs")[0].at("steps").size() == 4);
  CHECK(j.at("cumulative").at("mean").get<double>() == r.cumulative.mean);
  CHECK_FALSE(report_json(r).at("runs")[0].contains("steps"));
}

TEST_CASE("reduced experiment produces one row per scenario") {
  CHECK_THROWS_AS(reduced_preset('C'), Error);
  CHECK(reduced_preset('A').zones * reduced_preset('A').years * kActionCount <= 160);
  ReducedConfig c = reduced_preset('A');
  c.zones = 2;
  c.years = 2;
  c.trips = 30;
  c.runs = 1;
  c.evalSeeds = 2;
  c.ppo.maxSteps = 256;
  c.ppo.parallelEnvs = 2;
  c.ppo.stepsPerUpdate = 64;
  c.ppo.hidden = 8;
  c.bo.initSamples = 5;
  c.bo.maxIterations = 3;
  c.bo.randomCandidates = 16;
  int lines = 0;
  const std::vector<RcpScenario> sc{RcpScenario::RCP26};
  const ReducedTable t = reduced_experiment(c, sc, [&](const std::string&) { ++lines; });
  REQUIRE(t.rows.size() == 1);
  CHECK(lines == 1);
  CHECK(t.rows[0].rl.n == 1);
  CHECK(t.rows[0].bo.n == 1);
  CHECK(t.rows[0].boPlans.size() == 1);
  CHECK(reduced_json(t).at("rows")[0].at("scenario") == "RCP26");
}
