#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "floodrl/policy.hpp"

using namespace floodrl;

namespace {

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
  for (auto& zone : m) {
    for (int a = 0; a < kActionCount; ++a) zone[a] = a == 0 || rng.uniform() < 0.6;
  }
  return m;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  }
  return m;
}

struct Instance {
  std::vector<Eigen::MatrixXd> S, X;
  std::vector<std::vector<ActionMask>> masks;
  std::vector<std::vector<int>> actions;
  std::vector<GraphInput> inputs;
  std::vector<PpoTarget> targets;
};

Instance random_instance(const PolicyParams& p, Rng& rng, int graphs) {
  Instance in;
  for (int b = 0; b < graphs; ++b) {
    const int n = 2 + static_cast<int>(rng.below(4));
    in.S.push_back(normalized_adjacency(random_graph(n, rng)));
    in.X.push_back(random_matrix(n, p.input_dim(), rng));
    in.masks.push_back(random_masks(n, rng));
  }
  for (int b = 0; b < graphs; ++b) in.inputs.push_back({&in.S[b], &in.X[b], &in.masks[b]});
  in.actions.resize(graphs);
  for (int b = 0; b < graphs; ++b) {
    const PolicyOutput out = evaluate(p, in.S[b], in.X[b], in.masks[b]);
    const JointSample s = sample(out.dist, rng);
    in.actions[b] = s.actions;
    // shift old log-probs so that some ratios fall outside the clip range
    in.targets.push_back({&in.actions[b], s.logProb + 0.3 * rng.normal(), rng.normal(), out.value + rng.normal()});
  }
  return in;
}

} // namespace

TEST_CASE("symmetric normalization with self loops") {
  ZoneGraph g;
  g.zones = 3;
  g.edges = {{0, 1}, {1, 2}};
  const Eigen::MatrixXd S = normalized_adjacency(g);
  CHECK(S(0, 0) == doctest::Approx(0.5));
  CHECK(S(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(S(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(S(0, 2) == 0.0);
  CHECK((S - S.transpose()).norm() == 0.0);
}

TEST_CASE("zero weights give uniform distributions over allowed actions") {
  const PolicyParams p(6, 8);
  Rng rng(1);
  const Eigen::MatrixXd X = random_matrix(3, 6, rng);
  ZoneGraph g;
  g.zones = 3;
  g.edges = {{0, 1}, {0, 2}};
  std::vector<ActionMask> masks(3);
  masks[0].fill(true);
  masks[1].fill(false);
  masks[1][0] = masks[1][4] = true;
  masks[2].fill(false);
  masks[2][0] = true;
  const PolicyOutput out = evaluate(p, normalized_adjacency(g), X, masks);
  for (int a = 0; a < kActionCount; ++a) CHECK(out.dist.probs(0, a) == doctest::Approx(1.0 / 8));
  CHECK(out.dist.probs(1, 0) == doctest::Approx(0.5));
  CHECK(out.dist.probs(1, 4) == doctest::Approx(0.5));
  CHECK(out.dist.probs(1, 2) == 0.0);
  CHECK(std::isinf(out.dist.logProbs(1, 2)));
  CHECK(out.dist.probs(2, 0) == 1.0);
  CHECK(out.value == 0.0);

  const JointSample s = sample(out.dist, rng);
  CHECK(s.actions[2] == 0);
  CHECK(masks[1][s.actions[1]]);
}

TEST_CASE("a zone with every action masked is a contract violation") {
  const PolicyParams p = PolicyParams::random(4, 8, 1);
  const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(1, 1);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(1, 4);
  std::vector<ActionMask> masks(1);
  masks[0].fill(false);
  try {
    evaluate(p, S, X, masks);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
  }
}

TEST_CASE("distributions sum to one and respect masks") {
  Rng rng(4);
  const PolicyParams p = PolicyParams::random(5, 16, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    const auto masks = random_masks(n, rng);
    const PolicyOutput out =
        evaluate(p, normalized_adjacency(random_graph(n, rng)), random_matrix(n, 5, rng), masks);
    for (int i = 0; i < n; ++i) {
      CHECK(out.dist.probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (int a = 0; a < kActionCount; ++a) {
        if (!masks[i][a]) CHECK(out.dist.probs(i, a) == 0.0);
      }
    }
  }
}

TEST_CASE("permutation equivariance of distributions and invariance of the value") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    const int n = 9;
    const PolicyParams p = PolicyParams::random(7, 32, seed);
    const ZoneGraph g = random_graph(n, rng);
    const Eigen::MatrixXd X = random_matrix(n, 7, rng);
    const auto masks = random_masks(n, rng);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    // node i of the original becomes node perm[i]
    ZoneGraph pg;
    pg.zones = n;
    for (auto [a, b] : g.edges) pg.edges.emplace_back(std::min(perm[a], perm[b]), std::max(perm[a], perm[b]));
    Eigen::MatrixXd PX(n, 7);
    std::vector<ActionMask> pm(n);
    for (int i = 0; i < n; ++i) {
      PX.row(perm[i]) = X.row(i);
      pm[perm[i]] = masks[i];
    }
    const PolicyOutput a = evaluate(p, normalized_adjacency(g), X, masks);
    const PolicyOutput b = evaluate(p, normalized_adjacency(pg), PX, pm);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      worst = std::max(worst, (a.dist.probs.row(i) - b.dist.probs.row(perm[i])).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-9);
    CHECK(std::abs(a.value - b.value) <= 1e-9);
  }
}

TEST_CASE("sampling: degenerate, frequencies and determinism") {
  ActionDistribution forced;
  forced.probs = Eigen::MatrixXd::Zero(2, kActionCount);
  forced.logProbs = Eigen::MatrixXd::Constant(2, kActionCount, -INFINITY);
  forced.probs(0, 3) = 1.0;
  forced.logProbs(0, 3) = 0.0;
  forced.probs(1, 0) = 1.0;
  forced.logProbs(1, 0) = 0.0;
  Rng rng(5);
  const JointSample s = sample(forced, rng);
  CHECK(s.actions == std::vector<int>{3, 0});
  CHECK(s.logProb == 0.0);

  ActionDistribution uniform;
  uniform.probs = Eigen::MatrixXd::Constant(1, kActionCount, 1.0 / 8);
  uniform.logProbs = Eigen::MatrixXd::Constant(1, kActionCount, std::log(1.0 / 8));
  const int draws = 80000;
  std::array<int, kActionCount> counts{};
  Rng u(1);
  for (int k = 0; k < draws; ++k) ++counts[sample(uniform, u).actions[0]];
  const double mean = draws / 8.0;
  const double sd = std::sqrt(draws * (1.0 / 8) * (7.0 / 8));
  for (int c : counts) CHECK(std::abs(c - mean) <= 2 * sd);

  Rng a(9), b(9);
  for (int k = 0; k < 100; ++k) CHECK(sample(uniform, a).actions == sample(uniform, b).actions);
  CHECK(greedy(forced) == std::vector<int>{3, 0});
}

TEST_CASE("loss gradient matches central finite differences") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Rng rng(seed);
    const PolicyParams p0 = PolicyParams::random(5, 8, seed);
    PolicyParams p = p0;
    // larger head weights so the entropy and ratio terms are far from trivial
    p.theta *= 2.0;
    const Instance in = random_instance(p, rng, 5);
    const LossCoefficients coef{0.2, 0.05, 0.5};
    Eigen::VectorXd g;
    ppo_loss(p, in.inputs, in.targets, coef, &g);

    const double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      PolicyParams plus = p, minus = p;
      plus.theta[k] += h;
      minus.theta[k] -= h;
      const double fd = (ppo_loss(plus, in.inputs, in.targets, coef, nullptr).total -
                         ppo_loss(minus, in.inputs, in.targets, coef, nullptr).total) /
                        (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(g[k]), 1e-6});
      worst = std::max(worst, std::abs(fd - g[k]) / denom);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("vanishing surrogate and value terms give zero gradient") {
  Rng rng(3);
  const PolicyParams p = PolicyParams::random(5, 8, 3);
  Instance in = random_instance(p, rng, 4);
  for (std::size_t b = 0; b < in.targets.size(); ++b) {
    in.targets[b].advantage = 0.0;
    in.targets[b].valueTarget = evaluate(p, in.S[b], in.X[b], in.masks[b]).value;
  }
  Eigen::VectorXd g;
  const LossStats st = ppo_loss(p, in.inputs, in.targets, {0.2, 0.0, 0.5}, &g);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.value == 0.0);

  // the entropy term alone still moves the weights
  ppo_loss(p, in.inputs, in.targets, {0.2, 0.01, 0.5}, &g);
  CHECK(g.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("ratio one means zero KL and no clipping") {
  Rng rng(8);
  const PolicyParams p = PolicyParams::random(5, 8, 8);
  Instance in = random_instance(p, rng, 6);
  for (std::size_t b = 0; b < in.targets.size(); ++b) {
    const PolicyOutput out = evaluate(p, in.S[b], in.X[b], in.masks[b]);
    in.targets[b].oldLogProb = joint_log_prob(out.dist, in.actions[b]);
  }
  const LossStats st = ppo_loss(p, in.inputs, in.targets, {}, nullptr);
  CHECK(std::abs(st.approxKl) < 1e-12);
  CHECK(st.clipFraction == 0.0);
}

TEST_CASE("adam minimizes a quadratic") {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 5.0);
  Adam opt(3);
  for (int k = 0; k < 3000; ++k) opt.step(x, 2.0 * (x - Eigen::VectorXd::Ones(3)), 0.01);
  CHECK((x - Eigen::VectorXd::Ones(3)).norm() < 1e-3);
}

TEST_CASE("policy checkpoints round-trip bit-exactly and reject damage") {
  const PolicyParams p = PolicyParams::random(kPolicyInputDim, 16, 77);
  const auto path = std::filesystem::temp_directory_path() / "floodrl_test_policy.bin";
  save_policy(p, path);
  const PolicyParams back = load_policy(path);
  CHECK(back.input_dim() == kPolicyInputDim);
  CHECK(back.hidden() == 16);
  CHECK(back.theta == p.theta);

  std::string bytes = read_text_file(path);
  CHECK(bytes.substr(0, 4) == "FRLA");
  CHECK(bytes[4] == 1); // version, little-endian
  for (std::string bad : {bytes.substr(0, bytes.size() - 3), "XXXX" + bytes.substr(4),
                          bytes.substr(0, 4) + std::string("\x02\0\0\0", 4) + bytes.substr(8)}) {
    try {
      decode_arrays(bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Parse);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("policy features") {
  ZoneState s = ZoneState::Zero(2, kZoneFeatureCount);
  s(1, 0) = std::expm1(20.0);
  s(1, 3) = 4.0;
  ZoneDescriptors d = ZoneDescriptors::Constant(2, kDescriptorCount, 0.5);
  const Eigen::MatrixXd x = policy_features(s, d, 0.25);
  CHECK(x.cols() == kPolicyInputDim);
  CHECK(x(0, 0) == 0.0);
  CHECK(x(1, 0) == doctest::Approx(2.0));
  CHECK(x(1, 3) == doctest::Approx(std::log1p(4.0)));
  CHECK(x(0, kZoneFeatureCount) == 0.5);
  CHECK(x(1, kPolicyInputDim - 1) == 0.25);
}
