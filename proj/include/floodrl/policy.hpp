#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "floodrl/env.hpp"

namespace floodrl {

/// Symmetric normalization D^-1/2 (A + I) D^-1/2 of the zone adjacency.
Eigen::MatrixXd normalized_adjacency(const ZoneGraph& graph);

/// Policy input per zone: log1p of the zone state (I, D, C scaled by 1/10),
/// the static zone descriptors and the elapsed fraction of the horizon.
inline constexpr int kPolicyInputDim = kZoneFeatureCount + kDescriptorCount + 1;
Eigen::MatrixXd policy_features(const ZoneState& state, const ZoneDescriptors& descriptors,
                                double timeFraction);

/// All weights in one flat vector; accessors expose the blocks.
///   W1 in x H, b1 H, W2 H x H, b2 H, Wp H x 8, bp 8, wv H, bv 1
class PolicyParams {
public:
  PolicyParams() = default;
  PolicyParams(int inputDim, int hidden);

  /// He-scaled trunk, near-zero action head, unit-scaled value head.
  static PolicyParams random(int inputDim, int hidden, std::uint64_t seed);

  int input_dim() const { return inputDim_; }
  int hidden() const { return hidden_; }
  Eigen::Index size() const { return theta.size(); }

  Eigen::VectorXd theta;

  using CMap = Eigen::Map<const Eigen::MatrixXd>;
  using Map = Eigen::Map<Eigen::MatrixXd>;
  CMap W1() const { return block(theta, 0); }
  CMap b1() const { return block(theta, 1); }
  CMap W2() const { return block(theta, 2); }
  CMap b2() const { return block(theta, 3); }
  CMap Wp() const { return block(theta, 4); }
  CMap bp() const { return block(theta, 5); }
  CMap wv() const { return block(theta, 6); }
  CMap bv() const { return block(theta, 7); }

  /// View of a gradient vector with the same layout.
  Map grad_block(Eigen::VectorXd& g, int which) const;

  struct Block {
    const char* name;
    Eigen::Index offset, rows, cols;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

private:
  CMap block(const Eigen::VectorXd& v, int which) const;

  int inputDim_ = 0;
  int hidden_ = 0;
  std::vector<Block> blocks_;
};

/// One graph observation; pointers must outlive the call.
struct GraphInput {
  const Eigen::MatrixXd* adjacency = nullptr; // normalized, n x n
  const Eigen::MatrixXd* features = nullptr;  // n x inputDim
  const std::vector<ActionMask>* masks = nullptr;
};

/// Batched forward pass over graphs stacked row-wise.
struct PolicyForward {
  std::vector<Eigen::Index> offsets; // first row of each graph, plus total
  Eigen::MatrixXd A1, Z1, H1, A2, Z2, H2, pooled;
  Eigen::MatrixXd logProbs; // -inf on masked entries
  Eigen::MatrixXd probs;
  Eigen::VectorXd values;
};

PolicyForward forward(const PolicyParams& params, std::span<const GraphInput> inputs);

/// Per-zone distribution for a single graph.
struct ActionDistribution {
  Eigen::MatrixXd probs;    // n x 8
  Eigen::MatrixXd logProbs; // n x 8, -inf where masked
};

struct PolicyOutput {
  ActionDistribution dist;
  double value = 0.0;
};

PolicyOutput evaluate(const PolicyParams& params, const Eigen::MatrixXd& adjacency,
                      const Eigen::MatrixXd& features, const std::vector<ActionMask>& masks);

struct JointSample {
  std::vector<int> actions;
  double logProb = 0.0;
};

/// One uniform draw per zone, inverse-CDF over the zone's probabilities.
JointSample sample(const ActionDistribution& dist, Rng& rng);
/// Most probable unmasked action per zone (lowest id on ties).
std::vector<int> greedy(const ActionDistribution& dist);
double joint_log_prob(const ActionDistribution& dist, std::span<const int> actions);

struct LossCoefficients {
  double clip = 0.2;
  double entropyCoef = 0.01;
  double valueCoef = 0.5;
};

struct PpoTarget {
  const std::vector<int>* actions = nullptr;
  double oldLogProb = 0.0;
  double advantage = 0.0;
  double valueTarget = 0.0;
};

struct LossStats {
  double total = 0.0;
  double policy = 0.0;  // clipped surrogate, sign as minimized
  double value = 0.0;   // mean squared value error
  double entropy = 0.0; // mean joint entropy
  double approxKl = 0.0;
  double clipFraction = 0.0;
};

/// Mean over the batch of  -min(r A, clip(r) A) + valueCoef (V - R)^2 - entropyCoef H,
/// with r the joint probability ratio and H the sum of zone entropies.
/// Writes the exact gradient into grad when given.
LossStats ppo_loss(const PolicyParams& params, std::span<const GraphInput> inputs,
                   std::span<const PpoTarget> targets, const LossCoefficients& coef,
                   Eigen::VectorXd* grad);

class Adam {
public:
  Adam() = default;
  explicit Adam(Eigen::Index size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);

  Eigen::VectorXd m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// Named little-endian arrays behind a magic + version header.
struct NamedArray {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  std::vector<double> data; // row-major
};

std::string encode_arrays(const std::vector<NamedArray>& arrays);
std::vector<NamedArray> decode_arrays(std::string_view bytes);
const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name);

std::vector<NamedArray> params_to_arrays(const PolicyParams& params);
PolicyParams params_from_arrays(const std::vector<NamedArray>& arrays);

void save_policy(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_policy(const std::filesystem::path& path);

} // namespace floodrl
