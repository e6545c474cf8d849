#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "omahgnn/hypergraph.hpp"
#include "omahgnn/tape.hpp"
#include "omahgnn/tensor.hpp"

namespace omahgnn {

struct HgnnConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  double leaky_slope = 0.2;
};

/// One message-passing round: weight (d_in x d_out) and the FS attention
/// vector (2 d_out x 1). The SS branch ignores `attention`.
struct LayerParams {
  Tensor weight;
  Tensor attention;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// External model parameters, shared by both attention branches.
struct HgnnParams {
  std::vector<LayerParams> layers;
  double leaky_slope = 0.2;

  /// Glorot-uniform weights and attention vectors.
  static HgnnParams init(std::size_t input_dim, std::size_t num_classes, const HgnnConfig& config,
                         std::uint64_t seed);

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  std::size_t num_scalars() const;
  /// Layer by layer: weight entries then attention entries.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  friend bool operator==(const HgnnParams&, const HgnnParams&) = default;
};

enum class Branch { kStructural, kFeature };

const char* to_string(Branch b);

/// Incidence layout shared by every forward pass over one hypergraph.
///
/// Incidence pairs (v, e) are enumerated node-major, so the pairs of one node
/// are contiguous and FS softmax segments are node ids. Structural
/// coefficients are computed once here.
class HgnnStructure {
 public:
  explicit HgnnStructure(const Hypergraph& g);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_hyperedges() const noexcept { return num_hyperedges_; }
  std::size_t num_pairs() const noexcept { return pair_node_.size(); }

  std::span<const std::uint32_t> pair_node() const noexcept { return pair_node_; }
  std::span<const std::uint32_t> pair_edge() const noexcept { return pair_edge_; }
  std::span<const std::uint32_t> member_node() const noexcept { return member_node_; }
  std::span<const std::uint32_t> member_edge() const noexcept { return member_edge_; }
  /// 1 / (d_i d_e) per incidence pair, as a column.
  const Tensor& structural_coefficients() const noexcept { return ss_; }

 private:
  std::size_t num_nodes_ = 0;
  std::size_t num_hyperedges_ = 0;
  std::vector<std::uint32_t> pair_node_;
  std::vector<std::uint32_t> pair_edge_;
  std::vector<std::uint32_t> member_node_;
  std::vector<std::uint32_t> member_edge_;
  Tensor ss_;
};

/// Parameters registered on a tape.
struct BoundHgnn {
  std::vector<Var> weights;
  std::vector<Var> attentions;
  double leaky_slope = 0.2;
};

BoundHgnn bind(Tape& tape, const HgnnParams& params);
/// Gradients in HgnnParams::flatten order.
std::vector<double> flat_grad(const Tape& tape, const BoundHgnn& bound);

// Stage 1: x_e = mean of member rows.
Var aggregate_hyperedges(Tape& tape, const HgnnStructure& s, Var node_feats);
Tensor aggregate_hyperedges(const Hypergraph& g, const Tensor& node_feats);

/// s_ie = 1 / (d_i d_e) for every incidence pair, node-major.
std::vector<double> ss_coefficients(const Hypergraph& g);

/// softmax over E(v_i) of leaky_relu(a . [x_i w || x_e w]). `node_hidden` and
/// `edge_hidden` are the already-transformed x w rows.
Var fs_coefficients(Tape& tape, const HgnnStructure& s, Var node_hidden, Var edge_hidden,
                    Var attention, double slope);
std::vector<double> fs_coefficients(const Hypergraph& g, const Tensor& node_hidden,
                                    const Tensor& edge_hidden, const Tensor& attention,
                                    double slope = 0.2);

/// Stage 2: sigma(x_i w + sum_e s_ie x_e w), sigma = elu when `activate`, else identity.
Var node_update(Tape& tape, const HgnnStructure& s, Var node_hidden, Var edge_hidden, Var coeffs,
                bool activate);
Tensor node_update(const Hypergraph& g, const Tensor& node_feats, const Tensor& edge_feats,
                   std::span<const double> coeffs, const Tensor& weight, bool activate);

/// Full stack of message-passing layers; returns logits rows for `eval_ids`.
Var forward(Tape& tape, const HgnnStructure& s, Var features, const BoundHgnn& params, Branch branch,
            std::span<const NodeId> eval_ids);
Tensor forward(const HgnnStructure& s, const Tensor& features, const HgnnParams& params,
               Branch branch, std::span<const NodeId> eval_ids);

/// Column of per-row cross-entropy losses -log softmax(logits)[label].
Var per_sample_ce(Tape& tape, Var logits, std::span<const std::uint32_t> labels);
double ce_loss(std::span<const double> logits, std::size_t label);

struct ForwardOutput {
  Tensor logits_ss;
  Tensor logits_fs;
  std::vector<double> loss_ss;
  std::vector<double> loss_fs;
};

/// Both branches with the same parameters; `labels[v]` is node v's class.
ForwardOutput branch_losses(const HgnnStructure& s, const Tensor& features,
                            std::span<const int> labels, const HgnnParams& params,
                            std::span<const NodeId> ids);

}  // namespace omahgnn
