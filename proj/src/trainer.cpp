#include "omahgnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "omahgnn/error.hpp"
#include "omahgnn/rng.hpp"

namespace omahgnn {

namespace {

std::vector<std::uint32_t> targets_for(const Dataset& ds, std::span<const NodeId> ids) {
  std::vector<std::uint32_t> out;
  out.reserve(ids.size());
  for (NodeId v : ids) {
    if (!ds.is_labeled(v)) throw ContractError("node " + std::to_string(v) + " is unlabeled");
    out.push_back(static_cast<std::uint32_t>(ds.labels[v]));
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void require_finite(std::span<const double> v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(where) + " is not finite");
  }
}

// Both branch loss columns for `ids`, plus gradient of their sum when `grad` is set.
double summed_branch_loss(const HgnnStructure& s, const Dataset& ds, const HgnnParams& params,
                          std::span<const NodeId> ids, std::vector<double>* grad) {
  const auto targets = targets_for(ds, ids);
  double total = 0.0;
  if (grad) grad->assign(params.num_scalars(), 0.0);
  for (Branch b : {Branch::kStructural, Branch::kFeature}) {
    Tape tape;
    BoundHgnn bound = bind(tape, params);
    Var loss = tape.sum(per_sample_ce(tape, forward(tape, s, tape.constant(ds.features), bound, b, ids),
                                      targets));
    total += tape.value(loss).item();
    if (grad) {
      tape.backward(loss);
      const auto g = flat_grad(tape, bound);
      for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] += g[i];
    }
  }
  return total;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) z += (o[c] = std::exp(in[c] - mx));
    for (auto& x : o) x /= z;
  }
  return out;
}

Prediction predict_with(const HgnnStructure& s, const TrainState& state, const Dataset& ds,
                        std::span<const NodeId> ids, PredictMode mode) {
  if (ds.feature_dim() != state.hgnn.input_dim()) {
    throw DataError(DataErrorCode::kShapeMismatch,
                    "dataset has " + std::to_string(ds.feature_dim()) + " features, model expects " +
                        std::to_string(state.hgnn.input_dim()));
  }
  if (ds.num_classes != state.hgnn.output_dim()) {
    throw DataError(DataErrorCode::kShapeMismatch,
                    "dataset has " + std::to_string(ds.num_classes) + " classes, model predicts " +
                        std::to_string(state.hgnn.output_dim()));
  }
  for (NodeId v : ids) {
    if (v >= ds.num_nodes()) throw IndexError("predict: node " + std::to_string(v));
  }
  Prediction p;
  if (mode == PredictMode::kStructural) {
    p.scores = softmax_rows(forward(s, ds.features, state.hgnn, Branch::kStructural, ids));
  } else if (mode == PredictMode::kFeature) {
    p.scores = softmax_rows(forward(s, ds.features, state.hgnn, Branch::kFeature, ids));
  } else {
    const Tensor ss = softmax_rows(forward(s, ds.features, state.hgnn, Branch::kStructural, ids));
    const Tensor fs = softmax_rows(forward(s, ds.features, state.hgnn, Branch::kFeature, ids));
    p.scores = Tensor(ss.rows(), ss.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const std::size_t level = assign_level(overlapness(ds.graph, ids[r]), state.partition.centroids);
      const double a = level < state.level_alpha.size() ? state.level_alpha[level] : 0.5;
      for (std::size_t c = 0; c < ss.cols(); ++c) p.scores(r, c) = a * ss(r, c) + (1.0 - a) * fs(r, c);
    }
  }
  p.labels.resize(ids.size());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto row = p.scores.row(r);
    p.labels[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return p;
}

}  // namespace

const char* to_string(ScheduleKind kind) {
  return kind == ScheduleKind::kConstant ? "constant" : "inverse-sqrt";
}

const char* to_string(MetaSplitPolicy policy) {
  return policy == MetaSplitPolicy::kDisjoint ? "disjoint" : "from-test";
}

const char* to_string(ExternalOptimizer opt) {
  return opt == ExternalOptimizer::kGradientDescent ? "gd" : "adam";
}

const char* to_string(PredictMode mode) {
  switch (mode) {
    case PredictMode::kStructural: return "ss";
    case PredictMode::kFeature: return "fs";
    case PredictMode::kBlend: return "blend";
  }
  return "blend";
}

double lr(const ScheduleSpec& schedule, std::size_t t) {
  if (t == 0) throw ContractError("lr: steps are 1-based");
  if (schedule.kind == ScheduleKind::kConstant) return schedule.base;
  return std::min(1.0 / schedule.m_hat, schedule.base / std::sqrt(static_cast<double>(t)));
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

ClassMetrics classification_metrics(std::span<const int> predicted, std::span<const int> truth,
                                    std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw ContractError("metrics: length mismatch");
  ClassMetrics m;
  m.count = truth.size();
  std::vector<std::size_t> tp(num_classes), pred(num_classes), actual(num_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto y = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (y < num_classes) ++actual[y];
    if (p < num_classes) ++pred[p];
    if (y == p) {
      ++correct;
      if (y < num_classes) ++tp[y];
    }
  }
  m.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  m.precision.resize(num_classes);
  m.recall.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    m.precision[c] = pred[c] ? static_cast<double>(tp[c]) / static_cast<double>(pred[c]) : 0.0;
    m.recall[c] = actual[c] ? static_cast<double>(tp[c]) / static_cast<double>(actual[c]) : 0.0;
  }
  return m;
}

Trainer::Trainer(const Dataset& dataset, TrainConfig config)
    : dataset_(dataset), config_(std::move(config)), structure_(dataset.graph),
      batch_gen_(make_stream(config_.seed, kStreamBatch)) {
  validate(dataset_);
  if (dataset_.splits.train.empty()) throw DataError(DataErrorCode::kMalformed, "training split is empty");
  if (config_.alpha_pin && !(*config_.alpha_pin >= 0.0 && *config_.alpha_pin <= 1.0)) {
    throw ConfigError("alpha_pin must lie in [0, 1]");
  }
  state_.train_ids = dataset_.splits.train;

  // Overlap levels from the training nodes' overlapness.
  const OverlapVector p = overlap_vector(dataset_.graph, state_.train_ids);
  std::vector<double> defined;
  for (const auto& v : p.values)
    if (v) defined.push_back(*v);
  if (defined.empty()) {
    state_.partition.centroids = {1.0};
    state_.partition.k = 1;
    state_.partition.requested_k = config_.kmeans.k;
  } else {
    state_.partition = kmeans_1d(defined, config_.kmeans);
  }
  std::vector<std::size_t> tasks;
  tasks.reserve(p.size());
  std::size_t next = 0;
  for (const auto& v : p.values) tasks.push_back(v ? state_.partition.labels[next++] : 0);
  state_.partition.labels = tasks;
  state_.train_tasks = std::move(tasks);

  state_.hgnn = HgnnParams::init(dataset_.feature_dim(), dataset_.num_classes, config_.hgnn, config_.seed);
  state_.mwn = MwnParams::init(state_.partition.k, config_.mwn, config_.seed);

  if (config_.meta_split == MetaSplitPolicy::kDisjoint) {
    state_.meta_ids = dataset_.splits.meta;
  } else {
    auto gen = make_stream(config_.seed, "batch/meta");
    std::vector<NodeId> pool = dataset_.splits.test;
    shuffle(pool, gen);
    pool.resize(std::min(pool.size(), dataset_.splits.meta.size()));
    std::sort(pool.begin(), pool.end());
    state_.meta_ids = std::move(pool);
  }
  refresh_alpha();
}

std::vector<NodeId> Trainer::next_batch() {
  const auto& train = state_.train_ids;
  if (config_.batch_size == 0 || config_.batch_size >= train.size()) return train;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, batch_gen_);
  order.resize(config_.batch_size);
  std::sort(order.begin(), order.end());
  std::vector<NodeId> batch;
  for (auto i : order) batch.push_back(train[i]);
  return batch;
}

StepCache Trainer::intermediate_update(std::span<const NodeId> batch) const {
  StepCache c;
  c.batch.assign(batch.begin(), batch.end());
  c.lr_external = lr(config_.external, state_.step + 1);
  {
    std::vector<std::size_t> pos(dataset_.num_nodes(), SIZE_MAX);
    for (std::size_t j = 0; j < state_.train_ids.size(); ++j) pos[state_.train_ids[j]] = j;
    for (NodeId v : batch) {
      if (pos[v] == SIZE_MAX) throw ContractError("batch node " + std::to_string(v) + " is not a training node");
      c.tasks.push_back(state_.train_tasks[pos[v]]);
    }
  }
  const auto targets = targets_for(dataset_, batch);
  const std::size_t n = batch.size();
  const bool pinned = config_.alpha_pin.has_value();
  const double pin = pinned ? *config_.alpha_pin : 0.5;
  const std::size_t dim = state_.hgnn.num_scalars();
  if (pinned) c.weighted_grad.assign(dim, 0.0);

  for (Branch b : {Branch::kStructural, Branch::kFeature}) {
    Tape tape;
    BoundHgnn bound = bind(tape, state_.hgnn);
    Var losses = per_sample_ce(tape, forward(tape, structure_, tape.constant(dataset_.features), bound, b, batch),
                               targets);
    auto& loss_out = b == Branch::kStructural ? c.loss_ss : c.loss_fs;
    loss_out = tape.value(losses).storage();
    if (pinned) {
      const double w = b == Branch::kStructural ? pin : 1.0 - pin;
      tape.backward(losses, Tensor(n, 1, w));
      const auto g = flat_grad(tape, bound);
      for (std::size_t i = 0; i < dim; ++i) c.weighted_grad[i] += g[i];
      continue;
    }
    auto& grads = b == Branch::kStructural ? c.grad_ss : c.grad_fs;
    grads.resize(n);
    Tensor seed(n, 1);
    for (std::size_t j = 0; j < n; ++j) {
      seed[j] = 1.0;
      tape.backward(losses, seed);
      seed[j] = 0.0;
      grads[j] = flat_grad(tape, bound);
    }
  }

  if (pinned) {
    c.weights.assign(n, SampleWeights{pin, 1.0 - pin});
  } else {
    c.weights = mwn_forward(c.loss_ss, c.loss_fs, c.tasks, state_.mwn);
  }

  c.w_hat = state_.hgnn.flatten();
  std::vector<double> step(dim, 0.0);
  if (pinned) {
    step = c.weighted_grad;
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const auto [a, bw] = c.weights[j];
      for (std::size_t i = 0; i < dim; ++i) step[i] += a * c.grad_ss[j][i] + bw * c.grad_fs[j][i];
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    c.w_hat[i] -= c.lr_external * (step[i] + config_.weight_decay * c.w_hat[i]);
  }
  require_finite(c.w_hat, "intermediate weights");
  return c;
}

double Trainer::meta_loss_through_step(const StepCache& cache, const MwnParams& theta) const {
  const auto weights = mwn_forward(cache.loss_ss, cache.loss_fs, cache.tasks, theta);
  std::vector<double> w = state_.hgnn.flatten();
  std::vector<double> step(w.size(), 0.0);
  for (std::size_t j = 0; j < weights.size(); ++j) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      step[i] += weights[j].alpha * cache.grad_ss[j][i] + weights[j].beta * cache.grad_fs[j][i];
    }
  }
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cache.lr_external * (step[i] + config_.weight_decay * w[i]);
  HgnnParams at = state_.hgnn;
  at.assign(w);
  if (state_.meta_ids.empty()) return 0.0;
  return summed_branch_loss(structure_, dataset_, at, state_.meta_ids, nullptr) /
         static_cast<double>(state_.meta_ids.size());
}

MetaGradient Trainer::meta_gradient(const StepCache& cache) const {
  MetaGradient mg;
  const std::size_t n = cache.batch.size();
  mg.theta.assign(state_.mwn.num_scalars(), 0.0);
  mg.g_bar.assign(n, 0.0);
  if (state_.meta_ids.empty() || n == 0) return mg;

  HgnnParams at = state_.hgnn;
  at.assign(cache.w_hat);
  std::vector<double> g_meta;
  const double m = static_cast<double>(state_.meta_ids.size());
  mg.meta_loss = summed_branch_loss(structure_, dataset_, at, state_.meta_ids, &g_meta) / m;
  for (auto& x : g_meta) x /= m;
  mg.g_meta_norm = l2_norm(g_meta);
  if (cache.grad_ss.size() != n) return mg;  // pinned: Theta is not trained

  for (std::size_t j = 0; j < n; ++j) {
    mg.g_bar[j] = dot(g_meta, cache.grad_ss[j]) - dot(g_meta, cache.grad_fs[j]);
  }

  if (state_.mwn.mode == MwnOutputMode::kComplementary) {
    std::vector<double> seed(n), zero(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) seed[j] = -cache.lr_external * mg.g_bar[j];
    mg.theta = mwn_vjp(cache.loss_ss, cache.loss_fs, cache.tasks, state_.mwn, seed, zero);
  } else {
    static bool warned = false;
    if (!warned) {
      std::cerr << "warning: independent MWN outputs; meta-gradient uses central differences\n";
      warned = true;
    }
    const double eps = 1e-5;
    std::vector<double> theta = state_.mwn.flatten();
    MwnParams probe = state_.mwn;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double keep = theta[i];
      theta[i] = keep + eps;
      probe.assign(theta);
      const double up = meta_loss_through_step(cache, probe);
      theta[i] = keep - eps;
      probe.assign(theta);
      const double down = meta_loss_through_step(cache, probe);
      theta[i] = keep;
      mg.theta[i] = (up - down) / (2.0 * eps);
    }
  }
  require_finite(mg.theta, "meta-gradient");
  return mg;
}

void Trainer::internal_update(std::span<const double> grad_theta, double lr_internal) {
  if (grad_theta.size() != state_.mwn.num_scalars()) throw ContractError("internal_update: gradient size");
  require_finite(grad_theta, "internal gradient");
  std::vector<double> theta = state_.mwn.flatten();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr_internal * grad_theta[i];
  require_finite(theta, "internal parameters");
  state_.mwn.assign(theta);
}

double Trainer::external_update(const StepCache& cache) {
  std::vector<double> w = state_.hgnn.flatten();
  std::vector<double> g;
  if (!cache.weighted_grad.empty()) {
    g = cache.weighted_grad;
  } else {
    g.assign(w.size(), 0.0);
    const auto weights = mwn_forward(cache.loss_ss, cache.loss_fs, cache.tasks, state_.mwn);
    for (std::size_t j = 0; j < weights.size(); ++j) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        g[i] += weights[j].alpha * cache.grad_ss[j][i] + weights[j].beta * cache.grad_fs[j][i];
      }
    }
  }
  for (std::size_t i = 0; i < w.size(); ++i) g[i] += config_.weight_decay * w[i];
  require_finite(g, "external gradient");

  const double rate = cache.lr_external;
  if (config_.optimizer == ExternalOptimizer::kGradientDescent) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= rate * g[i];
  } else {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    auto& a = state_.adam;
    if (a.m.size() != w.size()) {
      a.m.assign(w.size(), 0.0);
      a.v.assign(w.size(), 0.0);
    }
    ++a.t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(a.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(a.t));
    for (std::size_t i = 0; i < w.size(); ++i) {
      a.m[i] = b1 * a.m[i] + (1.0 - b1) * g[i];
      a.v[i] = b2 * a.v[i] + (1.0 - b2) * g[i] * g[i];
      w[i] -= rate * (a.m[i] / c1) / (std::sqrt(a.v[i] / c2) + eps);
    }
  }
  require_finite(w, "external parameters");
  state_.hgnn.assign(w);
  return l2_norm(g);
}

const StepRecord& Trainer::step() {
  const std::size_t t = state_.step + 1;
  auto snapshot = std::make_shared<const TrainState>(state_);
  try {
    const auto batch = next_batch();
    StepCache cache = intermediate_update(batch);

    StepRecord rec;
    rec.step = t;
    rec.lr_external = cache.lr_external;
    const std::size_t k = state_.mwn.num_tasks();
    std::vector<double> alpha_sum(k, 0.0);
    std::vector<std::size_t> alpha_count(k, 0);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const auto& w = cache.weights[j];
      rec.train_loss += w.alpha * cache.loss_ss[j] + w.beta * cache.loss_fs[j];
      alpha_sum[cache.tasks[j]] += w.alpha;
      ++alpha_count[cache.tasks[j]];
    }
    if (!batch.empty()) rec.train_loss /= static_cast<double>(batch.size());
    rec.mean_alpha.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      if (alpha_count[i]) rec.mean_alpha[i] = alpha_sum[i] / static_cast<double>(alpha_count[i]);
    }

    if (!config_.alpha_pin) {
      MetaGradient mg = meta_gradient(cache);
      rec.meta_loss = mg.meta_loss;
      rec.meta_grad_norm = mg.g_meta_norm;
      rec.internal_grad_norm = l2_norm(mg.theta);
      rec.lr_internal = lr(config_.internal, t);
      internal_update(mg.theta, rec.lr_internal);
    } else if (!state_.meta_ids.empty()) {
      HgnnParams at = state_.hgnn;
      at.assign(cache.w_hat);
      rec.meta_loss = summed_branch_loss(structure_, dataset_, at, state_.meta_ids, nullptr) /
                      static_cast<double>(state_.meta_ids.size());
    }
    rec.external_grad_norm = external_update(cache);
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.meta_loss)) {
      throw NumericError("loss is not finite");
    }
    state_.step = t;
    state_.history.push_back(std::move(rec));
  } catch (const NumericError& e) {
    state_ = *snapshot;
    throw TrainingError(t, e.what(), snapshot);
  }
  return state_.history.back();
}

void Trainer::train() {
  while (state_.step < config_.steps) step();
  refresh_alpha();
}

void Trainer::refresh_alpha() {
  const std::size_t k = state_.mwn.num_tasks();
  state_.level_alpha.assign(k, 0.5);
  const auto& ids = state_.train_ids;
  std::vector<SampleWeights> weights;
  if (config_.alpha_pin) {
    weights.assign(ids.size(), SampleWeights{*config_.alpha_pin, 1.0 - *config_.alpha_pin});
  } else {
    const ForwardOutput out = branch_losses(structure_, dataset_.features, dataset_.labels, state_.hgnn, ids);
    weights = mwn_forward(out.loss_ss, out.loss_fs, state_.train_tasks, state_.mwn);
  }
  std::vector<double> sum(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  double total = 0.0;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    sum[state_.train_tasks[j]] += weights[j].alpha;
    ++count[state_.train_tasks[j]];
    total += weights[j].alpha;
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (count[i]) state_.level_alpha[i] = sum[i] / static_cast<double>(count[i]);
  }
  state_.mean_alpha = ids.empty() ? 0.5 : total / static_cast<double>(ids.size());
}

Prediction Trainer::predict(std::span<const NodeId> ids, PredictMode mode) const {
  return predict_with(structure_, state_, dataset_, ids, mode);
}

TestAccuracy Trainer::test_accuracy() const {
  const auto& test = dataset_.splits.test;
  std::vector<int> truth;
  for (NodeId v : test) truth.push_back(dataset_.labels[v]);
  auto acc = [&](PredictMode mode) {
    return classification_metrics(predict(test, mode).labels, truth, dataset_.num_classes).accuracy;
  };
  return {acc(PredictMode::kStructural), acc(PredictMode::kFeature), acc(PredictMode::kBlend)};
}

Prediction predict(const TrainState& state, const Dataset& dataset, std::span<const NodeId> ids,
                   PredictMode mode) {
  HgnnStructure s(dataset.graph);
  return predict_with(s, state, dataset, ids, mode);
}

}  // namespace omahgnn
