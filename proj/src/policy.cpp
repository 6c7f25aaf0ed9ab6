#include "floodrl/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace floodrl {

Eigen::MatrixXd normalized_adjacency(const ZoneGraph& graph) {
  const int n = graph.zones;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (auto [i, j] : graph.edges) {
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  const Eigen::VectorXd dinv = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return dinv.asDiagonal() * a * dinv.asDiagonal();
}

Eigen::MatrixXd policy_features(const ZoneState& state, const ZoneDescriptors& descriptors,
                                double timeFraction) {
  require(state.rows() == descriptors.rows(), ErrorKind::Contract,
          "state and descriptors disagree on the zone count");
  const Eigen::Index n = state.rows();
  Eigen::MatrixXd x(n, kPolicyInputDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < kZoneFeatureCount; ++c) {
      const double v = std::log1p(std::max(0.0, state(i, c)));
      x(i, c) = c < 3 ? v / 10.0 : v;
    }
    for (int c = 0; c < kDescriptorCount; ++c) x(i, kZoneFeatureCount + c) = descriptors(i, c);
    x(i, kPolicyInputDim - 1) = timeFraction;
  }
  return x;
}

// ---------------------------------------------------------------- parameters

PolicyParams::PolicyParams(int inputDim, int hidden) : inputDim_(inputDim), hidden_(hidden) {
  require(inputDim > 0 && hidden > 0, ErrorKind::Validation, "policy dimensions must be positive");
  const Eigen::Index F = inputDim, H = hidden, K = kActionCount;
  Eigen::Index off = 0;
  auto add = [&](const char* name, Eigen::Index r, Eigen::Index c) {
    blocks_.push_back({name, off, r, c});
    off += r * c;
  };
  add("W1", F, H);
  add("b1", H, 1);
  add("W2", H, H);
  add("b2", H, 1);
  add("Wp", H, K);
  add("bp", K, 1);
  add("wv", H, 1);
  add("bv", 1, 1);
  theta = Eigen::VectorXd::Zero(off);
}

PolicyParams PolicyParams::random(int inputDim, int hidden, std::uint64_t seed) {
  PolicyParams p(inputDim, hidden);
  Rng rng(mix_seed(seed, 0xA11CE));
  const double scales[] = {std::sqrt(2.0 / inputDim), 0.0, std::sqrt(2.0 / hidden), 0.0,
                           0.01 / std::sqrt(hidden),  0.0, 1.0 / std::sqrt(hidden), 0.0};
  for (std::size_t b = 0; b < p.blocks_.size(); ++b) {
    const Block& blk = p.blocks_[b];
    for (Eigen::Index k = 0; k < blk.rows * blk.cols; ++k) p.theta[blk.offset + k] = scales[b] * rng.normal();
  }
  return p;
}

PolicyParams::CMap PolicyParams::block(const Eigen::VectorXd& v, int which) const {
  const Block& b = blocks_.at(which);
  return CMap(v.data() + b.offset, b.rows, b.cols);
}

PolicyParams::Map PolicyParams::grad_block(Eigen::VectorXd& g, int which) const {
  const Block& b = blocks_.at(which);
  return Map(g.data() + b.offset, b.rows, b.cols);
}

// ------------------------------------------------------------------- forward

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_finite(const Eigen::MatrixXd& m, const char* name) {
  if (!m.allFinite()) fail(ErrorKind::Numerical, std::string("non-finite values in ") + name);
}

} // namespace

PolicyForward forward(const PolicyParams& p, std::span<const GraphInput> inputs) {
  require(!inputs.empty(), ErrorKind::Contract, "forward needs at least one graph");
  PolicyForward f;
  f.offsets.push_back(0);
  for (const GraphInput& in : inputs) {
    require(in.adjacency && in.features && in.masks, ErrorKind::Contract, "incomplete graph input");
    const Eigen::Index n = in.features->rows();
    require(n > 0 && in.adjacency->rows() == n && in.adjacency->cols() == n &&
                static_cast<Eigen::Index>(in.masks->size()) == n,
            ErrorKind::Contract, "graph input shapes disagree");
    require(in.features->cols() == p.input_dim(), ErrorKind::Contract,
            "feature width does not match the policy");
    f.offsets.push_back(f.offsets.back() + n);
  }
  const Eigen::Index N = f.offsets.back();
  const Eigen::Index B = static_cast<Eigen::Index>(inputs.size());
  const int H = p.hidden();

  f.A1.resize(N, p.input_dim());
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::Index n = f.offsets[b + 1] - f.offsets[b];
    check_finite(*inputs[b].features, "features");
    f.A1.middleRows(f.offsets[b], n).noalias() = *inputs[b].adjacency * *inputs[b].features;
  }
  f.Z1.noalias() = f.A1 * p.W1();
  f.Z1.rowwise() += p.b1().col(0).transpose();
  f.H1 = f.Z1.cwiseMax(0.0);

  f.A2.resize(N, H);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::Index n = f.offsets[b + 1] - f.offsets[b];
    f.A2.middleRows(f.offsets[b], n).noalias() = *inputs[b].adjacency * f.H1.middleRows(f.offsets[b], n);
  }
  f.Z2.noalias() = f.A2 * p.W2();
  f.Z2.rowwise() += p.b2().col(0).transpose();
  f.H2 = f.Z2.cwiseMax(0.0);

  Eigen::MatrixXd logits = f.H2 * p.Wp();
  logits.rowwise() += p.bp().col(0).transpose();
  check_finite(logits, "logits");

  f.pooled.resize(B, H);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::Index n = f.offsets[b + 1] - f.offsets[b];
    f.pooled.row(b) = f.H2.middleRows(f.offsets[b], n).colwise().mean();
  }
  f.values = f.pooled * p.wv().col(0);
  f.values.array() += p.bv()(0, 0);
  check_finite(f.values, "value");

  f.logProbs.resize(N, kActionCount);
  f.probs.resize(N, kActionCount);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& masks = *inputs[b].masks;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(masks.size()); ++i) {
      const Eigen::Index row = f.offsets[b] + i;
      double mx = kNegInf;
      for (int a = 0; a < kActionCount; ++a) {
        if (masks[i][a]) mx = std::max(mx, logits(row, a));
      }
      require(mx != kNegInf, ErrorKind::Contract, "zone " + std::to_string(i) + " has every action masked");
      double z = 0.0;
      for (int a = 0; a < kActionCount; ++a) {
        if (masks[i][a]) z += std::exp(logits(row, a) - mx);
      }
      const double lz = mx + std::log(z);
      for (int a = 0; a < kActionCount; ++a) {
        if (masks[i][a]) {
          f.logProbs(row, a) = logits(row, a) - lz;
          f.probs(row, a) = std::exp(f.logProbs(row, a));
        } else {
          f.logProbs(row, a) = kNegInf;
          f.probs(row, a) = 0.0;
        }
      }
    }
  }
  return f;
}

PolicyOutput evaluate(const PolicyParams& params, const Eigen::MatrixXd& adjacency,
                      const Eigen::MatrixXd& features, const std::vector<ActionMask>& masks) {
  const GraphInput in{&adjacency, &features, &masks};
  PolicyForward f = forward(params, std::span<const GraphInput>(&in, 1));
  return PolicyOutput{{std::move(f.probs), std::move(f.logProbs)}, f.values[0]};
}

JointSample sample(const ActionDistribution& dist, Rng& rng) {
  JointSample s;
  s.actions.resize(dist.probs.rows());
  for (Eigen::Index i = 0; i < dist.probs.rows(); ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = -1;
    for (int a = 0; a < kActionCount; ++a) {
      if (dist.probs(i, a) <= 0.0) continue;
      pick = a; // last positive entry absorbs rounding
      acc += dist.probs(i, a);
      if (u < acc) break;
    }
    s.actions[i] = pick;
    s.logProb += dist.logProbs(i, pick);
  }
  return s;
}

std::vector<int> greedy(const ActionDistribution& dist) {
  std::vector<int> out(dist.probs.rows());
  for (Eigen::Index i = 0; i < dist.probs.rows(); ++i) {
    Eigen::Index best = 0;
    dist.probs.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

double joint_log_prob(const ActionDistribution& dist, std::span<const int> actions) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < dist.logProbs.rows(); ++i) lp += dist.logProbs(i, actions[i]);
  return lp;
}

// ---------------------------------------------------------------------- loss

LossStats ppo_loss(const PolicyParams& p, std::span<const GraphInput> inputs,
                   std::span<const PpoTarget> targets, const LossCoefficients& coef,
                   Eigen::VectorXd* grad) {
  require(inputs.size() == targets.size(), ErrorKind::Contract, "inputs and targets disagree");
  const PolicyForward f = forward(p, inputs);
  const Eigen::Index B = static_cast<Eigen::Index>(inputs.size());
  const double invB = 1.0 / static_cast<double>(B);

  LossStats st;
  Eigen::MatrixXd dLogits = Eigen::MatrixXd::Zero(f.probs.rows(), kActionCount);
  Eigen::VectorXd dV(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const PpoTarget& t = targets[b];
    const auto& acts = *t.actions;
    const Eigen::Index off = f.offsets[b];
    const Eigen::Index n = f.offsets[b + 1] - off;
    require(static_cast<Eigen::Index>(acts.size()) == n, ErrorKind::Contract, "action count mismatch");

    double lp = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) lp += f.logProbs(off + i, acts[i]);
    require(std::isfinite(lp), ErrorKind::Numerical, "non-finite log-probability (masked action in batch?)");
    const double logRatio = lp - t.oldLogProb;
    const double r = std::exp(logRatio);
    const double A = t.advantage;
    const double unclipped = r * A;
    const double clipped = std::clamp(r, 1.0 - coef.clip, 1.0 + coef.clip) * A;
    const bool useUnclipped = unclipped <= clipped;
    st.policy -= std::min(unclipped, clipped);
    if (std::abs(r - 1.0) > coef.clip) st.clipFraction += 1.0;
    st.approxKl += (r - 1.0) - logRatio;
    const double gLp = useUnclipped ? -r * A : 0.0;

    const double err = f.values[b] - t.valueTarget;
    st.value += err * err;
    dV[b] = 2.0 * coef.valueCoef * err * invB;

    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index row = off + i;
      double h = 0.0;
      for (int a = 0; a < kActionCount; ++a) {
        const double pa = f.probs(row, a);
        if (pa > 0.0) h -= pa * f.logProbs(row, a);
      }
      st.entropy += h;
      for (int a = 0; a < kActionCount; ++a) {
        const double pa = f.probs(row, a);
        if (pa <= 0.0) continue;
        const double dlp = (a == acts[i] ? 1.0 : 0.0) - pa;
        const double dh = -pa * (f.logProbs(row, a) + h);
        dLogits(row, a) = (gLp * dlp - coef.entropyCoef * dh) * invB;
      }
    }
  }
  st.policy *= invB;
  st.value *= invB;
  st.entropy *= invB;
  st.approxKl *= invB;
  st.clipFraction *= invB;
  st.total = st.policy + coef.valueCoef * st.value - coef.entropyCoef * st.entropy;
  require(std::isfinite(st.total), ErrorKind::Numerical, "non-finite loss");
  if (!grad) return st;

  grad->setZero(p.size());
  auto gW1 = p.grad_block(*grad, 0);
  auto gb1 = p.grad_block(*grad, 1);
  auto gW2 = p.grad_block(*grad, 2);
  auto gb2 = p.grad_block(*grad, 3);
  auto gWp = p.grad_block(*grad, 4);
  auto gbp = p.grad_block(*grad, 5);
  auto gwv = p.grad_block(*grad, 6);
  auto gbv = p.grad_block(*grad, 7);

  gWp.noalias() = f.H2.transpose() * dLogits;
  gbp = dLogits.colwise().sum().transpose();
  gwv.noalias() = f.pooled.transpose() * dV;
  gbv(0, 0) = dV.sum();

  Eigen::MatrixXd dH2 = dLogits * p.Wp().transpose();
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::Index n = f.offsets[b + 1] - f.offsets[b];
    dH2.middleRows(f.offsets[b], n).rowwise() += (dV[b] / static_cast<double>(n)) * p.wv().col(0).transpose();
  }
  const Eigen::MatrixXd dZ2 = dH2.cwiseProduct((f.Z2.array() > 0.0).cast<double>().matrix());
  gW2.noalias() = f.A2.transpose() * dZ2;
  gb2 = dZ2.colwise().sum().transpose();
  const Eigen::MatrixXd dA2 = dZ2 * p.W2().transpose();
  Eigen::MatrixXd dH1(dA2.rows(), dA2.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::Index n = f.offsets[b + 1] - f.offsets[b];
    dH1.middleRows(f.offsets[b], n).noalias() =
        inputs[b].adjacency->transpose() * dA2.middleRows(f.offsets[b], n);
  }
  const Eigen::MatrixXd dZ1 = dH1.cwiseProduct((f.Z1.array() > 0.0).cast<double>().matrix());
  gW1.noalias() = f.A1.transpose() * dZ1;
  gb1 = dZ1.colwise().sum().transpose();
  if (!grad->allFinite()) fail(ErrorKind::Numerical, "non-finite values in gradient");
  return st;
}

// ---------------------------------------------------------------------- adam

Adam::Adam(Eigen::Index size, double b1, double b2, double e)
    : m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)), beta1(b1), beta2(b2), eps(e) {}

void Adam::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
  require(grad.size() == theta.size() && m.size() == theta.size(), ErrorKind::Contract,
          "optimizer state does not match the parameters");
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[4] = {'F', 'R', 'L', 'A'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  std::string_view in;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > in.size()) fail(ErrorKind::Parse, "checkpoint truncated at byte " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
};

} // namespace

std::string encode_arrays(const std::vector<NamedArray>& arrays) {
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    require(static_cast<Eigen::Index>(a.data.size()) == a.rows * a.cols, ErrorKind::Contract,
            "array " + a.name + " has inconsistent shape");
    put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put_u64(out, static_cast<std::uint64_t>(a.rows));
    put_u64(out, static_cast<std::uint64_t>(a.cols));
    for (double d : a.data) put_u64(out, std::bit_cast<std::uint64_t>(d));
  }
  return out;
}

std::vector<NamedArray> decode_arrays(std::string_view bytes) {
  Reader r{bytes};
  r.need(4);
  if (bytes.substr(0, 4) != std::string_view(kMagic, 4)) fail(ErrorKind::Parse, "not a checkpoint file");
  r.pos = 4;
  const std::uint32_t version = r.u32();
  require(version == kVersion, ErrorKind::Parse, "unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  std::vector<NamedArray> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    const std::uint32_t len = r.u32();
    r.need(len);
    a.name = std::string(bytes.substr(r.pos, len));
    r.pos += len;
    a.rows = static_cast<Eigen::Index>(r.u64());
    a.cols = static_cast<Eigen::Index>(r.u64());
    const std::uint64_t n = static_cast<std::uint64_t>(a.rows) * static_cast<std::uint64_t>(a.cols);
    r.need(n * 8);
    a.data.resize(n);
    for (double& d : a.data) d = std::bit_cast<double>(r.u64());
    out.push_back(std::move(a));
  }
  require(r.pos == bytes.size(), ErrorKind::Parse, "trailing bytes after checkpoint arrays");
  return out;
}

const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const NamedArray& a : arrays) {
    if (a.name == name) return a;
  }
  fail(ErrorKind::Parse, "checkpoint lacks array " + name);
}

std::vector<NamedArray> params_to_arrays(const PolicyParams& p) {
  std::vector<NamedArray> out;
  for (const auto& b : p.blocks()) {
    NamedArray a{b.name, b.rows, b.cols, {}};
    const PolicyParams::CMap m(p.theta.data() + b.offset, b.rows, b.cols);
    for (Eigen::Index i = 0; i < b.rows; ++i) {
      for (Eigen::Index j = 0; j < b.cols; ++j) a.data.push_back(m(i, j));
    }
    out.push_back(std::move(a));
  }
  return out;
}

PolicyParams params_from_arrays(const std::vector<NamedArray>& arrays) {
  const NamedArray& w1 = find_array(arrays, "W1");
  PolicyParams p(static_cast<int>(w1.rows), static_cast<int>(w1.cols));
  for (const auto& b : p.blocks()) {
    const NamedArray& a = find_array(arrays, b.name);
    require(a.rows == b.rows && a.cols == b.cols, ErrorKind::Parse,
            std::string("array ") + b.name + " has the wrong shape");
    Eigen::Map<Eigen::MatrixXd> m(p.theta.data() + b.offset, b.rows, b.cols);
    for (Eigen::Index i = 0; i < b.rows; ++i) {
      for (Eigen::Index j = 0; j < b.cols; ++j) m(i, j) = a.data[i * b.cols + j];
    }
  }
  require(p.theta.allFinite(), ErrorKind::Numerical, "checkpoint holds non-finite weights");
  return p;
}

void save_policy(const PolicyParams& params, const std::filesystem::path& path) {
  write_text_file(path, encode_arrays(params_to_arrays(params)));
}

PolicyParams load_policy(const std::filesystem::path& path) {
  return params_from_arrays(decode_arrays(read_text_file(path)));
}

} // namespace floodrl
