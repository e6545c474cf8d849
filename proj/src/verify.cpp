#include "omahgnn/verify.hpp"

#include <algorithm>
#include <cmath>

#include "omahgnn/error.hpp"
#include "omahgnn/rng.hpp"
#include "omahgnn/trainer.hpp"

namespace omahgnn {

namespace {

TrainConfig toy_config(const ToySpec& spec) {
  TrainConfig c;
  c.hgnn.layers = 2;
  c.hgnn.hidden = spec.hidden;
  c.mwn.hidden = spec.mwn_hidden;
  c.kmeans.k = spec.k;
  c.external = {ScheduleKind::kConstant, spec.lr_external, 10.0};
  c.internal = {ScheduleKind::kConstant, 0.0, 10.0};
  c.seed = spec.seed;
  return c;
}

std::vector<std::uint32_t> labels_of(const Dataset& ds, std::span<const NodeId> ids) {
  std::vector<std::uint32_t> out;
  for (NodeId v : ids) out.push_back(static_cast<std::uint32_t>(ds.labels[v]));
  return out;
}

// Mean loss of one branch, and its gradient when `grad` is set.
double mean_branch_loss(const HgnnStructure& s, const Dataset& ds, const HgnnParams& params, Branch b,
                        std::span<const NodeId> ids, std::vector<double>* grad) {
  Tape tape;
  BoundHgnn bound = bind(tape, params);
  Var losses = per_sample_ce(tape, forward(tape, s, tape.constant(ds.features), bound, b, ids), labels_of(ds, ids));
  Var mean = tape.scale(tape.sum(losses), 1.0 / static_cast<double>(ids.size()));
  if (grad) {
    tape.backward(mean);
    *grad = flat_grad(tape, bound);
  }
  return tape.value(mean).item();
}

}  // namespace

Dataset make_toy(const ToySpec& spec) {
  SyntheticSpec s;
  s.num_nodes = spec.nodes;
  s.num_classes = spec.classes;
  s.num_hyperedges = spec.hyperedges;
  s.min_size = 2;
  s.max_size = std::min<std::size_t>(4, spec.nodes);
  s.homophily = 0.7;
  s.feature_dim = spec.features;
  s.feature_noise = 0.5;
  s.train_fraction = 0.5;
  s.meta_fraction = 0.25;
  s.test_fraction = 0.25;
  return generate_synthetic(s, spec.seed);
}

GradCheckReport hgnn_gradient_check(const ToySpec& spec, Branch branch, const CheckOptions& options) {
  const Dataset ds = make_toy(spec);
  const HgnnStructure s(ds.graph);
  const HgnnParams params = HgnnParams::init(ds.feature_dim(), ds.num_classes, toy_config(spec).hgnn, spec.seed);
  const auto& ids = ds.splits.train;
  std::vector<double> analytic;
  mean_branch_loss(s, ds, params, branch, ids, &analytic);
  if (options.inject_fault) {
    for (auto& g : analytic) g *= 1.01;
  }
  HgnnParams probe = params;
  ScalarFn f = [&](std::span<const double> x) {
    probe.assign(x);
    return mean_branch_loss(s, ds, probe, branch, ids, nullptr);
  };
  const auto x = params.flatten();
  return finite_diff_check(f, x, analytic, options.eps);
}

MetaCheckReport meta_gradient_check(const ToySpec& spec, const CheckOptions& options) {
  const Dataset ds = make_toy(spec);
  Trainer trainer(ds, toy_config(spec));

  // Random Theta, so every coordinate carries signal.
  {
    auto gen = make_stream(spec.seed, "verify/theta");
    auto theta = trainer.state().mwn.flatten();
    for (auto& t : theta) t = uniform(gen, -1.0, 1.0);
    trainer.state().mwn.assign(theta);
  }

  const auto& st = trainer.state();
  const StepCache cache = trainer.intermediate_update(st.train_ids);
  std::vector<double> analytic = trainer.meta_gradient(cache).theta;
  MetaCheckReport report;
  for (double g : analytic) report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(g));
  if (options.inject_fault) {
    for (auto& g : analytic) g *= 1.01;
  }

  const HgnnStructure& s = trainer.structure();
  const auto train_y = labels_of(ds, st.train_ids);
  const double lambda = cache.lr_external;
  MwnParams probe = st.mwn;
  ScalarFn meta_loss = [&](std::span<const double> theta) {
    probe.assign(theta);
    // Weights from the perturbed Theta on losses at w(t).
    const auto weights = mwn_forward(cache.loss_ss, cache.loss_fs, st.train_tasks, probe);
    std::vector<double> a(weights.size()), b(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j) {
      a[j] = weights[j].alpha;
      b[j] = weights[j].beta;
    }
    // Gradient of sum_j a_j L1_j + b_j L2_j on fresh tapes.
    std::vector<double> w = st.hgnn.flatten();
    std::vector<double> total(w.size(), 0.0);
    for (Branch br : {Branch::kStructural, Branch::kFeature}) {
      Tape tape;
      BoundHgnn bound = bind(tape, st.hgnn);
      Var losses = per_sample_ce(tape, forward(tape, s, tape.constant(ds.features), bound, br, st.train_ids), train_y);
      Var coef = tape.constant(Tensor::column(br == Branch::kStructural ? a : b));
      tape.backward(tape.sum(tape.mul_rows(losses, coef)));
      const auto g = flat_grad(tape, bound);
      for (std::size_t i = 0; i < g.size(); ++i) total[i] += g[i];
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lambda * total[i];
    HgnnParams w_hat = st.hgnn;
    w_hat.assign(w);
    return mean_branch_loss(s, ds, w_hat, Branch::kStructural, st.meta_ids, nullptr) +
           mean_branch_loss(s, ds, w_hat, Branch::kFeature, st.meta_ids, nullptr);
  };
  const auto theta = st.mwn.flatten();
  report.fd = finite_diff_check(meta_loss, theta, analytic, options.eps);
  return report;
}

GradCheckSummary run_grad_check(const ToySpec& spec, const CheckOptions& options) {
  GradCheckSummary out;
  out.hgnn_ss = hgnn_gradient_check(spec, Branch::kStructural, options).max_rel_error;
  out.hgnn_fs = hgnn_gradient_check(spec, Branch::kFeature, options).max_rel_error;
  const MetaCheckReport meta = meta_gradient_check(spec, options);
  out.meta = meta.fd.max_rel_error;
  out.meta_max_abs = meta.max_abs_analytic;
  out.passed = out.hgnn_ss <= kHgnnGradTolerance && out.hgnn_fs <= kHgnnGradTolerance &&
               out.meta <= kMetaGradTolerance;
  return out;
}

}  // namespace omahgnn
