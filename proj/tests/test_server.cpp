#include "doctest.h"

#include <thread>

#include "floodrl/experiments.hpp"
#include "floodrl/server.hpp"

#include "httplib.h"

using namespace floodrl;
using nlohmann::json;

namespace {

std::shared_ptr<const WorldModel> small_world() {
  static auto w = [] {
    SynthOptions o;
    o.zones = 4;
    o.trips = 80;
    o.seed = 11;
    return std::make_shared<const WorldModel>(synth_world(o));
  }();
  return w;
}

void add_world(SessionService& svc) { svc.register_world("small", small_world()); }

json actions_req(std::vector<int> a) { return json{{"actions", a}}; }

std::vector<int> zeros() { return std::vector<int>(small_world()->zone_count(), 0); }

json request(std::uint64_t seed, int years = 77) {
  return json{{"world", "small"}, {"scenario", "RCP45"}, {"seed", seed}, {"endYear", 2024 + years - 1}};
}

// Zone with the largest DoNothing I+D+C under a fixed storm where a soakaway is allowed.
int flood_prone_zone(double rain) {
  EnvConfig cfg;
  cfg.fixedRain_mm = rain;
  FloodEnv env(small_world(), cfg);
  env.reset(1);
  const StepResult r = env.step(zeros());
  int best = -1;
  double worst = -1.0;
  for (int z = 0; z < env.zone_count(); ++z) {
    const double cost = r.impacts.infrastructure_dkk[z] + r.impacts.delay_dkk[z] + r.impacts.cancellation_dkk[z];
    if (env.masks()[z][static_cast<int>(MeasureId::Soakaway)] && cost > worst) {
      worst = cost;
      best = z;
    }
  }
  return best;
}

// Direct simulation of a what-if branch from a fresh session.
RewardComponents simulate_branch(const EnvConfig& cfg, std::uint64_t previewSeed, const std::vector<int>& first,
                                 int horizon) {
  FloodEnv env(small_world(), cfg);
  env.reset(cfg.seed);
  env.reseed_events(previewSeed);
  RewardComponents total = env.step(first).components;
  for (int k = 0; k < horizon; ++k) total += env.step(zeros()).components;
  return total;
}

double idc(const json& c) { return c["I"].get<double>() + c["D"].get<double>() + c["C"].get<double>(); }

} // namespace

TEST_CASE("a new session starts at the first year with zero impacts") {
  SessionService svc;
  add_world(svc);
  const json s = svc.create_session(request(3));
  CHECK(s["version"] == kApiVersion);
  CHECK(s["id"] == "s1");
  CHECK(s["year"] == 2024);
  CHECK(s["elapsed"] == 0);
  CHECK(s["graph"]["zones"] == 4);
  CHECK(s["catalog"].size() == kActionCount);
  CHECK(s["masks"].size() == 4);
  for (const json& z : s["state"]) {
    CHECK(z["I"] == 0.0);
    CHECK(z["D"] == 0.0);
    CHECK(z["C"] == 0.0);
    for (const json& v : z["status"]) CHECK(v == 0.0);
  }
  CHECK(svc.create_session(request(3))["id"] == "s2");
}

TEST_CASE("sessions with the same seed see the same events") {
  SessionService svc;
  add_world(svc);
  const std::string a = svc.create_session(request(9))["id"];
  const std::string b = svc.create_session(request(9))["id"];
  const std::string c = svc.create_session(request(10))["id"];
  bool anyDiffer = false;
  for (int t = 0; t < 6; ++t) {
    const json ra = svc.step(a, actions_req(zeros()));
    const json rb = svc.step(b, actions_req(zeros()));
    const json rc = svc.step(c, actions_req(zeros()));
    CHECK(ra["rain_mm"] == rb["rain_mm"]);
    CHECK(ra["components"] == rb["components"]);
    anyDiffer = anyDiffer || ra["rain_mm"] != rc["rain_mm"];
  }
  CHECK(anyDiffer);
  CHECK(svc.state_hash(a) == svc.state_hash(b));
}

TEST_CASE("bad create requests map to 4xx errors") {
  SessionService svc;
  add_world(svc);
  json req = request(1);
  req["scenario"] = "RCP60";
  try {
    svc.create_session(req);
    FAIL("unknown scenario accepted");
  } catch (const Error& e) {
    const ApiError api = to_api_error(e);
    CHECK(api.status == 400);
    const std::string msg = api.what();
    for (const char* id : {"RCP26", "RCP45", "RCP85"}) CHECK(msg.find(id) != std::string::npos);
    CHECK(api.details["validScenarios"].size() == 3);
  }
  req = request(1);
  req["world"] = "atlantis";
  try {
    svc.create_session(req);
    FAIL("unknown world accepted");
  } catch (const ApiError& e) {
    CHECK(e.status == 404);
    CHECK(e.details["worlds"] == json::array({"small"}));
  }
  req = request(1);
  req["policy"] = "nobody";
  CHECK_THROWS_AS(svc.create_session(req), ApiError);
  CHECK_THROWS_AS(svc.get_session("s99"), ApiError);
}

TEST_CASE("all-DoNothing steps reproduce the NC trajectory and the reward identity") {
  SessionService svc;
  add_world(svc);
  const std::string id = svc.create_session(request(4, 8))["id"];
  const RunReport nc = run_policy(small_world(), [] {
    EnvConfig e;
    e.endYear = 2031;
    return e;
  }(), PolicySpec::no_control(), std::vector<std::uint64_t>{4});
  REQUIRE(nc.runs.size() == 1);
  const auto& expected = nc.runs[0].steps;
  REQUIRE(expected.size() == 8);
  for (int t = 0; t < 8; ++t) {
    const json r = svc.step(id, actions_req(zeros()));
    const json& c = r["components"];
    CHECK(r["year"] == expected[t].year);
    CHECK(r["rain_mm"].get<double>() == expected[t].rain_mm);
    CHECK(c["I"].get<double>() == expected[t].components.infrastructure);
    CHECK(c["D"].get<double>() == expected[t].components.delay);
    CHECK(c["C"].get<double>() == expected[t].components.cancellation);
    CHECK(c["A"] == 0.0);
    CHECK(c["M"] == 0.0);
    const double sum = c["I"].get<double>() + c["D"].get<double>() + c["C"].get<double>() + c["A"].get<double>() +
                       c["M"].get<double>();
    CHECK(r["reward"].get<double>() + sum == 0.0);
    CHECK(r["done"] == (t == 7));
  }
  try {
    svc.step(id, actions_req(zeros()));
    FAIL("step after the final year accepted");
  } catch (const ApiError& e) {
    CHECK(e.status == 409);
    CHECK(e.code == "protocol");
  }
  CHECK(svc.get_session(id)["history"].size() == 8);
  CHECK(svc.replay_matches(id));
}

TEST_CASE("masked and malformed actions are rejected without side effects") {
  SessionService svc;
  add_world(svc);
  const std::string id = svc.create_session(request(2))["id"];
  std::vector<int> a = zeros();
  a[1] = static_cast<int>(MeasureId::Soakaway);
  a[3] = static_cast<int>(MeasureId::Soakaway);
  svc.step(id, actions_req(a));
  const std::string before = svc.state_hash(id);
  try {
    svc.step(id, actions_req(a));
    FAIL("masked action accepted");
  } catch (const ApiError& e) {
    CHECK(e.status == 409);
    CHECK(e.code == "feasibility");
    CHECK(e.details["zones"] == json::array({1, 3}));
  }
  CHECK_THROWS_AS(svc.step(id, actions_req({0, 0})), ApiError);
  CHECK_THROWS_AS(svc.step(id, actions_req({0, 0, 0, 8})), ApiError);
  CHECK_THROWS_AS(svc.step(id, json{{"acts", zeros()}}), ApiError);
  CHECK(svc.state_hash(id) == before);
  CHECK(svc.replay_matches(id));
}

TEST_CASE("what-if leaves the parent untouched and is stable within a year") {
  SessionService svc;
  add_world(svc);
  const std::string id = svc.create_session(request(6, 10))["id"];
  svc.step(id, actions_req(zeros()));
  const std::string before = svc.state_hash(id);
  std::vector<int> a = zeros();
  a[0] = static_cast<int>(MeasureId::StorageTank);
  const json req{{"actions", a}, {"horizon", 3}};
  const json w1 = svc.whatif(id, req);
  const json w2 = svc.whatif(id, req);
  CHECK(svc.state_hash(id) == before);
  CHECK(w1 == w2);
  CHECK(w1["steps"].size() == 4);
  CHECK_FALSE(w1["clamped"].get<bool>());
  json other = req;
  other["nonce"] = 1;
  CHECK(svc.whatif(id, other)["previewSeed"] != w1["previewSeed"]);

  // horizon 0 is exactly one hypothetical step
  const json w0 = svc.whatif(id, json{{"actions", a}, {"horizon", 0}});
  REQUIRE(w0["steps"].size() == 1);
  CHECK(w0["totals"] == w0["steps"][0]["components"]);
  CHECK(w0["reward"] == w0["steps"][0]["reward"]);

  // 9 years remain after the candidate year (2025..2033 of 2024..2033)
  const json far = svc.whatif(id, json{{"actions", zeros()}, {"horizon", 50}});
  CHECK(far["clamped"].get<bool>());
  CHECK(far["horizon"] == 8);
  CHECK(far["steps"].size() == 9);
  CHECK(far["steps"].back()["done"].get<bool>());

  try {
    svc.whatif(id, json{{"actions", zeros()}, {"policy", "attached"}});
    FAIL("attached policy mode without a policy accepted");
  } catch (const ApiError& e) {
    CHECK(e.status == 409);
  }
  CHECK(svc.state_hash(id) == before);
  CHECK(svc.replay_matches(id));
}

TEST_CASE("a soakaway in the flood-prone zone lowers impacts and raises costs under heavy rain") {
  const double rain = 90.0;
  const int zone = flood_prone_zone(rain);
  REQUIRE(zone >= 0);
  SessionService svc;
  add_world(svc);
  json req = request(8, 12);
  req["fixedRain_mm"] = rain;
  const std::string id = svc.create_session(req)["id"];
  std::vector<int> soak = zeros();
  soak[zone] = static_cast<int>(MeasureId::Soakaway);
  const int horizon = 4;
  const json nothing = svc.whatif(id, json{{"actions", zeros()}, {"horizon", horizon}});
  const json soaked = svc.whatif(id, json{{"actions", soak}, {"horizon", horizon}});
  CHECK(idc(soaked["totals"]) < idc(nothing["totals"]));
  CHECK(soaked["totals"]["A"].get<double>() > nothing["totals"]["A"].get<double>());

  EnvConfig cfg;
  cfg.seed = 8;
  cfg.endYear = 2035;
  cfg.fixedRain_mm = rain;
  const std::uint64_t previewSeed = nothing["previewSeed"];
  for (const auto& [branch, first] : {std::pair{nothing, zeros()}, std::pair{soaked, soak}}) {
    const RewardComponents oracle = simulate_branch(cfg, previewSeed, first, horizon);
    CHECK(branch["totals"]["I"].get<double>() == doctest::Approx(oracle.infrastructure).epsilon(1e-12));
    CHECK(branch["totals"]["D"].get<double>() == doctest::Approx(oracle.delay).epsilon(1e-12));
    CHECK(branch["totals"]["C"].get<double>() == doctest::Approx(oracle.cancellation).epsilon(1e-12));
    CHECK(branch["totals"]["A"].get<double>() == doctest::Approx(oracle.implementation).epsilon(1e-12));
    CHECK(branch["totals"]["M"].get<double>() == doctest::Approx(oracle.maintenance).epsilon(1e-12));
  }
}

TEST_CASE("compare replays the attached policy over the same events") {
  auto policy = std::make_shared<const PolicyParams>(PolicyParams::random(kPolicyInputDim, 16, 21));
  SessionService svc;
  add_world(svc);
  svc.register_policy("pi", policy);
  json req = request(5, 6);
  req["policy"] = "pi";
  const std::string id = svc.create_session(req)["id"];
  CHECK(svc.compare(id)["years"].empty());

  // play the policy's own argmax actions: both series must coincide
  const PolicySpec spec = PolicySpec::trained(policy);
  EnvConfig cfg;
  cfg.endYear = 2029;
  const RunReport report = run_policy(small_world(), cfg, spec, std::vector<std::uint64_t>{5});
  for (int t = 0; t < 4; ++t) svc.step(id, actions_req(report.runs[0].steps[t].actions));
  const json cmp = svc.compare(id);
  CHECK(cmp["years"].size() == 4);
  CHECK(cmp["human"].size() == 4);
  CHECK(cmp["policy"].size() == 4);
  CHECK(cmp["human"] == cmp["policy"]);
  CHECK(cmp["humanActions"] == cmp["policyActions"]);

  const json attached = svc.whatif(id, json{{"actions", zeros()}, {"horizon", 1}, {"policy", "attached"}});
  CHECK(attached["steps"].size() == 2);

  const std::string bare = svc.create_session(request(5, 6))["id"];
  try {
    svc.compare(bare);
    FAIL("compare without a policy accepted");
  } catch (const ApiError& e) {
    CHECK(e.status == 409);
    CHECK(e.code == "no_policy");
  }
}

TEST_CASE("a trained policy beats all-DoNothing in the heavy-rain comparison") {
  const double rain = 90.0;
  EnvConfig env;
  env.endYear = 2031;
  env.fixedRain_mm = rain;
  env.rewardScale = 1e-7;
  PpoConfig ppo;
  ppo.parallelEnvs = 4;
  ppo.stepsPerUpdate = 64;
  ppo.batchSize = 64;
  ppo.maxSteps = 12000;
  ppo.hidden = 16;
  ppo.learningRate = 1e-3;
  ppo.seed = 3;
  auto policy = std::make_shared<const PolicyParams>(train_flood_policy(small_world(), env, ppo));

  SessionService svc;
  add_world(svc);
  svc.register_policy("trained", policy);
  json req = request(2, 8);
  req["fixedRain_mm"] = rain;
  req["policy"] = "trained";
  const std::string id = svc.create_session(req)["id"];
  for (int t = 0; t < 8; ++t) svc.step(id, actions_req(zeros()));
  const json cmp = svc.compare(id);
  CHECK(cmp["years"].size() == 8);
  CHECK(cmp["cumulative"]["policyCost"].get<double>() < cmp["cumulative"]["humanCost"].get<double>());

  // oracle: roll the policy directly through the experiment runner
  EnvConfig direct = env;
  direct.seed = 2;
  const RunReport rl = run_policy(small_world(), direct, PolicySpec::trained(policy), std::vector<std::uint64_t>{2});
  double cost = 0.0;
  for (const StepRecord& s : rl.runs[0].steps) cost += s.components.total();
  CHECK(cmp["cumulative"]["policyCost"].get<double>() == doctest::Approx(cost).epsilon(1e-12));
}

TEST_CASE("the HTTP routes serve the same payloads") {
  SessionService svc;
  add_world(svc);
  httplib::Server server;
  mount_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto post = [&](const std::string& path, const json& body) {
    auto res = cli.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    return std::pair{res->status, json::parse(res->body)};
  };
  auto get = [&](const std::string& path) {
    auto res = cli.Get(path);
    REQUIRE(res);
    return std::pair{res->status, json::parse(res->body)};
  };

  auto [st, created] = post("/sessions", request(4, 3));
  CHECK(st == 201);
  const std::string id = created["id"];
  CHECK(get("/sessions/" + id).first == 200);

  auto [st2, stepped] = post("/sessions/" + id + "/step", actions_req(zeros()));
  CHECK(st2 == 200);
  CHECK(stepped["year"] == 2024);
  CHECK(stepped["version"] == kApiVersion);

  auto [st3, w] = post("/sessions/" + id + "/whatif", json{{"actions", zeros()}, {"horizon", 1}});
  CHECK(st3 == 200);
  CHECK(w["steps"].size() == 2);

  CHECK(get("/sessions/" + id + "/compare").first == 409);
  CHECK(get("/sessions/nope").first == 404);
  auto [st4, err] = post("/sessions", json{{"world", "small"}, {"scenario", "bogus"}});
  CHECK(st4 == 400);
  CHECK(err["error"]["code"] == "domain");

  auto bad = cli.Post("/sessions/" + id + "/step", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["error"]["code"] == "parse");

  std::vector<int> masked = zeros();
  masked[2] = static_cast<int>(MeasureId::Soakaway);
  CHECK(post("/sessions/" + id + "/step", actions_req(masked)).first == 200);
  auto [st5, infeasible] = post("/sessions/" + id + "/whatif", actions_req(masked));
  CHECK(st5 == 409);
  CHECK(infeasible["error"]["details"]["zones"] == json::array({2}));

  auto [st6, worlds] = get("/worlds");
  CHECK(st6 == 200);
  REQUIRE(worlds["worlds"].size() == 1);
  CHECK(worlds["worlds"][0]["layout"].size() == 4);
  const json& box = worlds["worlds"][0]["layout"][0];
  CHECK(box["x1"].get<double>() > box["x0"].get<double>());
  CHECK(get("/catalog").second["measures"].size() == kActionCount);

  server.stop();
  worker.join();

  // identical request sequences give identical payloads
  SessionService replay;
  add_world(replay);
  const json again = replay.create_session(request(4, 3));
  CHECK(again["hash"] == created["hash"]);
  CHECK(replay.step(again["id"], actions_req(zeros())) == stepped);
}
