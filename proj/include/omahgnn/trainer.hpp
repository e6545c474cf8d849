#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "omahgnn/dataset.hpp"
#include "omahgnn/hgnn.hpp"
#include "omahgnn/mwn.hpp"
#include "omahgnn/partition.hpp"

namespace omahgnn {

enum class ScheduleKind { kConstant, kInverseSqrt };

const char* to_string(ScheduleKind kind);

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kInverseSqrt;
  double base = 0.01;  // c
  double m_hat = 10.0;  // smoothness estimate; the rate never exceeds 1 / m_hat

  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

/// constant: c. inverse-sqrt: min(1 / m_hat, c / sqrt(t)). t is 1-based.
double lr(const ScheduleSpec& schedule, std::size_t t);

enum class MetaSplitPolicy {
  kDisjoint,  // the dataset's meta split
  kFromTest,  // a sample of the test split, as large as the meta split
};

const char* to_string(MetaSplitPolicy policy);

enum class ExternalOptimizer { kGradientDescent, kAdam };

const char* to_string(ExternalOptimizer opt);

struct TrainConfig {
  HgnnConfig hgnn;
  MwnConfig mwn;
  KMeansOptions kmeans;
  ScheduleSpec external{ScheduleKind::kInverseSqrt, 0.01, 10.0};
  ScheduleSpec internal{ScheduleKind::kInverseSqrt, 10.0, 0.1};
  std::size_t steps = 200;
  std::uint64_t seed = 0;
  MetaSplitPolicy meta_split = MetaSplitPolicy::kDisjoint;
  std::size_t batch_size = 0;  // 0: full batch
  ExternalOptimizer optimizer = ExternalOptimizer::kGradientDescent;
  double weight_decay = 0.0;
  /// When set, alpha is fixed to this value (beta = 1 - alpha) and Theta is never updated.
  std::optional<double> alpha_pin;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based
  double lr_external = 0.0;
  double lr_internal = 0.0;
  /// Mean over the batch of alpha L1 + beta L2 at w(t) with alpha from Theta(t).
  double train_loss = 0.0;
  /// Mean over the meta set of L1 + L2 at the intermediate weights.
  double meta_loss = 0.0;
  /// Per task; empty when the batch held no sample of that task.
  std::vector<std::optional<double>> mean_alpha;
  double external_grad_norm = 0.0;
  double meta_grad_norm = 0.0;  // |g_meta|
  double internal_grad_norm = 0.0;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

struct TrainState {
  HgnnParams hgnn;
  MwnParams mwn;
  Partition partition;
  std::vector<NodeId> train_ids;
  std::vector<NodeId> meta_ids;
  std::vector<std::size_t> train_tasks;  // overlap level per training node
  std::size_t step = 0;
  std::vector<StepRecord> history;
  /// Mean alpha over training nodes of each level at the current parameters.
  std::vector<double> level_alpha;
  double mean_alpha = 0.5;
  AdamState adam;
};

/// A non-finite value during training. Carries the state as it was before the
/// failing step, with its history.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t step, const std::string& what, std::shared_ptr<const TrainState> partial)
      : std::runtime_error("step " + std::to_string(step) + ": " + what),
        step_(step),
        partial_(std::move(partial)) {}

  std::size_t step() const noexcept { return step_; }
  const TrainState& partial() const { return *partial_; }

 private:
  std::size_t step_;
  std::shared_ptr<const TrainState> partial_;
};

/// Per-sample quantities from Step 1, reused by Steps 2 and 3.
struct StepCache {
  std::vector<NodeId> batch;
  std::vector<std::size_t> tasks;
  std::vector<double> loss_ss;
  std::vector<double> loss_fs;
  std::vector<SampleWeights> weights;      // from Theta(t)
  std::vector<std::vector<double>> grad_ss;  // d L1_j / d w at w(t)
  std::vector<std::vector<double>> grad_fs;  // d L2_j / d w at w(t)
  /// Pinned alpha only: sum_j alpha g1_j + beta g2_j, in place of the per-sample gradients.
  std::vector<double> weighted_grad;
  std::vector<double> w_hat;  // flattened intermediate weights
  double lr_external = 0.0;
};

struct MetaGradient {
  std::vector<double> theta;  // dL_meta / dTheta, MwnParams::flatten order
  std::vector<double> g_bar;  // g_meta . (g1_j - g2_j) per batch sample
  double meta_loss = 0.0;
  double g_meta_norm = 0.0;
};

enum class PredictMode { kStructural, kFeature, kBlend };

const char* to_string(PredictMode mode);

struct Prediction {
  std::vector<int> labels;
  Tensor scores;  // rows x C class probabilities
};

struct ClassMetrics {
  double accuracy = 0.0;
  std::vector<double> precision;  // per class; 0 when nothing predicted
  std::vector<double> recall;     // per class; 0 when the class is absent
  std::size_t count = 0;
};

ClassMetrics classification_metrics(std::span<const int> predicted, std::span<const int> truth,
                                    std::size_t num_classes);

struct TestAccuracy {
  double ss = 0.0;
  double fs = 0.0;
  double blend = 0.0;
};

/// Alternating three-step optimization of the external model w and the internal
/// model Theta on one dataset.
class Trainer {
 public:
  /// Overlapness on training nodes, partition, parameter initialization.
  Trainer(const Dataset& dataset, TrainConfig config);

  const TrainConfig& config() const noexcept { return config_; }
  const Dataset& dataset() const noexcept { return dataset_; }
  const HgnnStructure& structure() const noexcept { return structure_; }
  const TrainState& state() const noexcept { return state_; }
  TrainState& state() noexcept { return state_; }

  /// Step 1: per-sample losses, weights and gradients at w(t); w_hat.
  StepCache intermediate_update(std::span<const NodeId> batch) const;
  /// Step 2: gradient of the meta loss at w_hat w.r.t. Theta.
  MetaGradient meta_gradient(const StepCache& cache) const;
  /// Theta <- Theta - lr * grad.
  void internal_update(std::span<const double> grad_theta, double lr_internal);
  /// Step 3: reweight with Theta(t+1) and commit w(t+1). Returns the gradient norm.
  double external_update(const StepCache& cache);

  /// Meta loss at the intermediate weights implied by `theta` and the cached
  /// per-sample gradients.
  double meta_loss_through_step(const StepCache& cache, const MwnParams& theta) const;

  const StepRecord& step();
  /// Runs until config().steps steps have been taken.
  void train();

  /// Recomputes level_alpha and mean_alpha at the current parameters.
  void refresh_alpha();

  Prediction predict(std::span<const NodeId> ids, PredictMode mode) const;
  TestAccuracy test_accuracy() const;

 private:
  std::vector<NodeId> next_batch();

  const Dataset& dataset_;
  TrainConfig config_;
  HgnnStructure structure_;
  TrainState state_;
  std::mt19937_64 batch_gen_;
};

/// Prediction from a stored state. Blend weights come from the level of each
/// node's overlapness under the stored centroids.
Prediction predict(const TrainState& state, const Dataset& dataset, std::span<const NodeId> ids,
                   PredictMode mode);

double l2_norm(std::span<const double> v);

}  // namespace omahgnn
