#include "omahgnn/mwn.hpp"

#include <cmath>
#include <string>

#include "omahgnn/error.hpp"
#include "omahgnn/rng.hpp"

namespace omahgnn {

namespace {

struct BoundMwn {
  Var shared_weight;
  Var shared_bias;
  std::vector<Var> head_weights;
  std::vector<Var> head_biases;
};

BoundMwn bind(Tape& tape, const MwnParams& p) {
  BoundMwn b{tape.parameter(p.shared_weight), tape.parameter(p.shared_bias), {}, {}};
  for (const auto& h : p.heads) {
    b.head_weights.push_back(tape.parameter(h.weight));
    b.head_biases.push_back(tape.parameter(h.bias));
  }
  return b;
}

std::vector<double> flat_grad(const Tape& tape, const BoundMwn& b) {
  std::vector<double> flat;
  auto append = [&](Var v) {
    const Tensor g = tape.grad(v);
    flat.insert(flat.end(), g.values().begin(), g.values().end());
  };
  append(b.shared_weight);
  append(b.shared_bias);
  for (std::size_t k = 0; k < b.head_weights.size(); ++k) {
    append(b.head_weights[k]);
    append(b.head_biases[k]);
  }
  return flat;
}

struct Outputs {
  Var alpha;
  Var beta;
};

// `inputs` is n x 2 (already transformed when log1p is on).
Outputs record_forward(Tape& tape, const BoundMwn& b, Var inputs, std::span<const std::size_t> tasks,
                       const MwnParams& p) {
  const std::size_t outs = p.outputs_per_head();
  for (auto t : tasks) {
    if (t >= p.num_tasks()) {
      throw ContractError("mwn: task " + std::to_string(t) + " out of range " +
                          std::to_string(p.num_tasks()));
    }
  }
  Var hidden = tape.elu(tape.add_row(tape.matmul(inputs, b.shared_weight), b.shared_bias));
  // All heads side by side; each row then reads its task's columns.
  Var heads_w = b.head_weights[0];
  Var heads_b = b.head_biases[0];
  for (std::size_t k = 1; k < b.head_weights.size(); ++k) {
    heads_w = tape.concat_cols(heads_w, b.head_weights[k]);
    heads_b = tape.concat_cols(heads_b, b.head_biases[k]);
  }
  Var raw = tape.add_row(tape.matmul(hidden, heads_w), heads_b);
  std::vector<std::uint32_t> col_a(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) col_a[i] = static_cast<std::uint32_t>(tasks[i] * outs);
  Var alpha = tape.sigmoid(tape.select_cols(raw, col_a));
  Var beta;
  if (p.mode == MwnOutputMode::kComplementary) {
    beta = tape.add(tape.constant(Tensor(tasks.size(), 1, 1.0)), tape.scale(alpha, -1.0));
  } else {
    std::vector<std::uint32_t> col_b(col_a);
    for (auto& c : col_b) ++c;
    beta = tape.sigmoid(tape.select_cols(raw, col_b));
  }
  return {alpha, beta};
}

Tensor make_inputs(std::span<const double> l1, std::span<const double> l2, const MwnParams& p) {
  if (l1.size() != l2.size()) throw ContractError("mwn: loss arrays differ in length");
  Tensor in(l1.size(), 2);
  for (std::size_t i = 0; i < l1.size(); ++i) {
    if (!std::isfinite(l1[i]) || !std::isfinite(l2[i]) || l1[i] < 0.0 || l2[i] < 0.0) {
      throw ContractError("mwn: losses must be finite and nonnegative");
    }
    in(i, 0) = p.log1p_inputs ? std::log1p(l1[i]) : l1[i];
    in(i, 1) = p.log1p_inputs ? std::log1p(l2[i]) : l2[i];
  }
  return in;
}

}  // namespace

const char* to_string(MwnOutputMode mode) {
  return mode == MwnOutputMode::kComplementary ? "complementary" : "independent";
}

MwnParams MwnParams::init(std::size_t num_tasks, const MwnConfig& config, std::uint64_t seed) {
  if (num_tasks == 0 || config.hidden == 0) throw ContractError("MwnParams: empty shape");
  auto gen = make_stream(seed, kStreamInitMwn);
  MwnParams p;
  p.mode = config.mode;
  p.log1p_inputs = config.log1p_inputs;
  const double limit = std::sqrt(6.0 / static_cast<double>(2 + config.hidden));
  p.shared_weight = Tensor(2, config.hidden);
  for (auto& x : p.shared_weight.values()) x = uniform(gen, -limit, limit);
  p.shared_bias = Tensor(1, config.hidden);
  const std::size_t outs = p.outputs_per_head();
  for (std::size_t k = 0; k < num_tasks; ++k) {
    p.heads.push_back(MwnHead{Tensor(config.hidden, outs), Tensor(1, outs)});
  }
  return p;
}

std::size_t MwnParams::num_scalars() const {
  std::size_t n = shared_weight.size() + shared_bias.size();
  for (const auto& h : heads) n += h.weight.size() + h.bias.size();
  return n;
}

std::vector<double> MwnParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_scalars());
  auto append = [&](const Tensor& t) { flat.insert(flat.end(), t.values().begin(), t.values().end()); };
  append(shared_weight);
  append(shared_bias);
  for (const auto& h : heads) {
    append(h.weight);
    append(h.bias);
  }
  return flat;
}

void MwnParams::assign(std::span<const double> flat) {
  if (flat.size() != num_scalars()) {
    throw ContractError("MwnParams::assign: " + std::to_string(flat.size()) + " values for " +
                        std::to_string(num_scalars()) + " parameters");
  }
  std::size_t k = 0;
  auto take = [&](Tensor& t) {
    for (auto& x : t.values()) x = flat[k++];
  };
  take(shared_weight);
  take(shared_bias);
  for (auto& h : heads) {
    take(h.weight);
    take(h.bias);
  }
}

std::vector<SampleWeights> mwn_forward(std::span<const double> l1, std::span<const double> l2,
                                       std::span<const std::size_t> tasks, const MwnParams& params) {
  if (tasks.size() != l1.size()) throw ContractError("mwn_forward: one task per sample required");
  std::vector<SampleWeights> out(l1.size());
  if (l1.empty()) return out;
  Tape tape;
  BoundMwn b = bind(tape, params);
  Outputs o = record_forward(tape, b, tape.constant(make_inputs(l1, l2, params)), tasks, params);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {tape.value(o.alpha)[i], tape.value(o.beta)[i]};
  }
  return out;
}

SampleWeights mwn_forward(double l1, double l2, std::size_t task, const MwnParams& params) {
  const std::size_t t[] = {task};
  return mwn_forward(std::span<const double>(&l1, 1), std::span<const double>(&l2, 1), t, params)[0];
}

MwnGrad mwn_grad(double l1, double l2, std::size_t task, const MwnParams& params) {
  Tape tape;
  BoundMwn b = bind(tape, params);
  // Inputs are a trainable slot so the same backward yields d/d(l1, l2).
  Var inputs = tape.parameter(
      make_inputs(std::span<const double>(&l1, 1), std::span<const double>(&l2, 1), params));
  std::array<double, 2> chain{1.0, 1.0};
  if (params.log1p_inputs) chain = {1.0 / (1.0 + l1), 1.0 / (1.0 + l2)};
  const std::size_t t[] = {task};
  Outputs o = record_forward(tape, b, inputs, t, params);

  MwnGrad g;
  tape.backward(o.alpha);
  g.alpha_theta = flat_grad(tape, b);
  {
    const Tensor gi = tape.grad(inputs);
    g.alpha_losses = {gi[0] * chain[0], gi[1] * chain[1]};
  }
  tape.backward(o.beta);
  g.beta_theta = flat_grad(tape, b);
  {
    const Tensor gi = tape.grad(inputs);
    g.beta_losses = {gi[0] * chain[0], gi[1] * chain[1]};
  }
  return g;
}

std::vector<double> mwn_vjp(std::span<const double> l1, std::span<const double> l2,
                            std::span<const std::size_t> tasks, const MwnParams& params,
                            std::span<const double> alpha_seed, std::span<const double> beta_seed) {
  if (alpha_seed.size() != l1.size() || beta_seed.size() != l1.size() || tasks.size() != l1.size()) {
    throw ContractError("mwn_vjp: inconsistent batch sizes");
  }
  if (l1.empty()) return std::vector<double>(params.num_scalars(), 0.0);
  Tape tape;
  BoundMwn b = bind(tape, params);
  Outputs o = record_forward(tape, b, tape.constant(make_inputs(l1, l2, params)), tasks, params);
  Var wa = tape.mul_rows(o.alpha, tape.constant(Tensor::column({alpha_seed.begin(), alpha_seed.end()})));
  Var wb = tape.mul_rows(o.beta, tape.constant(Tensor::column({beta_seed.begin(), beta_seed.end()})));
  tape.backward(tape.add(tape.sum(wa), tape.sum(wb)));
  return flat_grad(tape, b);
}

}  // namespace omahgnn
