#include "omahgnn/hgnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "omahgnn/error.hpp"
#include "omahgnn/rng.hpp"

namespace omahgnn {

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
              std::mt19937_64& gen) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(rows, cols);
  for (auto& x : t.values()) x = uniform(gen, -limit, limit);
  return t;
}

std::vector<std::uint32_t> checked_labels(std::span<const int> labels, std::span<const NodeId> ids,
                                          std::size_t num_classes) {
  std::vector<std::uint32_t> out;
  out.reserve(ids.size());
  for (NodeId v : ids) {
    if (v >= labels.size() || labels[v] < 0 || static_cast<std::size_t>(labels[v]) >= num_classes) {
      throw ContractError("node " + std::to_string(v) + " has no usable label");
    }
    out.push_back(static_cast<std::uint32_t>(labels[v]));
  }
  return out;
}

}  // namespace

const char* to_string(Branch b) { return b == Branch::kStructural ? "ss" : "fs"; }

HgnnParams HgnnParams::init(std::size_t input_dim, std::size_t num_classes,
                            const HgnnConfig& config, std::uint64_t seed) {
  if (config.layers == 0) throw ContractError("HgnnParams: at least one layer required");
  if (input_dim == 0 || num_classes == 0) throw ContractError("HgnnParams: empty input or output");
  auto gen_w = make_stream(seed, kStreamInitW);
  auto gen_a = make_stream(seed, kStreamInitA);
  HgnnParams p;
  p.leaky_slope = config.leaky_slope;
  std::size_t d_in = input_dim;
  for (std::size_t t = 0; t < config.layers; ++t) {
    const std::size_t d_out = t + 1 == config.layers ? num_classes : config.hidden;
    LayerParams layer;
    layer.weight = glorot(d_in, d_out, d_in, d_out, gen_w);
    layer.attention = glorot(2 * d_out, 1, 2 * d_out, 1, gen_a);
    p.layers.push_back(std::move(layer));
    d_in = d_out;
  }
  return p;
}

std::size_t HgnnParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.attention.size();
  return n;
}

std::vector<double> HgnnParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_scalars());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weight.values().begin(), l.weight.values().end());
    flat.insert(flat.end(), l.attention.values().begin(), l.attention.values().end());
  }
  return flat;
}

void HgnnParams::assign(std::span<const double> flat) {
  if (flat.size() != num_scalars()) {
    throw ContractError("HgnnParams::assign: " + std::to_string(flat.size()) + " values for " +
                        std::to_string(num_scalars()) + " parameters");
  }
  std::size_t k = 0;
  for (auto& l : layers) {
    for (auto& x : l.weight.values()) x = flat[k++];
    for (auto& x : l.attention.values()) x = flat[k++];
  }
}

HgnnStructure::HgnnStructure(const Hypergraph& g)
    : num_nodes_(g.num_nodes()), num_hyperedges_(g.num_hyperedges()) {
  pair_node_.reserve(g.nnz());
  pair_edge_.reserve(g.nnz());
  std::vector<double> ss;
  ss.reserve(g.nnz());
  std::vector<double> d_edge(g.num_hyperedges());
  for (EdgeId e = 0; e < g.num_hyperedges(); ++e) d_edge[e] = hyperedge_avg_degree(g, e);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const double d_v = static_cast<double>(node_degree(g, v));
    for (EdgeId e : g.incident_edges(v)) {
      pair_node_.push_back(v);
      pair_edge_.push_back(e);
      ss.push_back(1.0 / (d_v * d_edge[e]));
    }
  }
  ss_ = Tensor::column(std::move(ss));
  member_node_.reserve(g.nnz());
  member_edge_.reserve(g.nnz());
  for (EdgeId e = 0; e < g.num_hyperedges(); ++e) {
    for (NodeId v : g.members(e)) {
      member_node_.push_back(v);
      member_edge_.push_back(e);
    }
  }
}

BoundHgnn bind(Tape& tape, const HgnnParams& params) {
  BoundHgnn b;
  b.leaky_slope = params.leaky_slope;
  for (const auto& l : params.layers) {
    b.weights.push_back(tape.parameter(l.weight));
    b.attentions.push_back(tape.parameter(l.attention));
  }
  return b;
}

std::vector<double> flat_grad(const Tape& tape, const BoundHgnn& bound) {
  std::vector<double> flat;
  for (std::size_t t = 0; t < bound.weights.size(); ++t) {
    const Tensor gw = tape.grad(bound.weights[t]);
    const Tensor ga = tape.grad(bound.attentions[t]);
    flat.insert(flat.end(), gw.values().begin(), gw.values().end());
    flat.insert(flat.end(), ga.values().begin(), ga.values().end());
  }
  return flat;
}

Var aggregate_hyperedges(Tape& tape, const HgnnStructure& s, Var node_feats) {
  if (tape.value(node_feats).rows() != s.num_nodes()) {
    throw ContractError("aggregate_hyperedges: feature rows do not match node count");
  }
  Var member_rows = tape.gather_rows(node_feats, s.member_node());
  return tape.segment_mean(member_rows, s.member_edge(), s.num_hyperedges());
}

Tensor aggregate_hyperedges(const Hypergraph& g, const Tensor& node_feats) {
  HgnnStructure s(g);
  Tape tape;
  return tape.value(aggregate_hyperedges(tape, s, tape.constant(node_feats)));
}

std::vector<double> ss_coefficients(const Hypergraph& g) {
  HgnnStructure s(g);
  return s.structural_coefficients().storage();
}

Var fs_coefficients(Tape& tape, const HgnnStructure& s, Var node_hidden, Var edge_hidden,
                    Var attention, double slope) {
  const std::size_t width = tape.value(node_hidden).cols();
  if (tape.value(edge_hidden).cols() != width || tape.value(attention).rows() != 2 * width ||
      tape.value(attention).cols() != 1) {
    throw ContractError("fs_coefficients: attention vector must have 2x the hidden width");
  }
  Var pair_inputs = tape.concat_cols(tape.gather_rows(node_hidden, s.pair_node()),
                                     tape.gather_rows(edge_hidden, s.pair_edge()));
  Var scores = tape.leaky_relu(tape.matmul(pair_inputs, attention), slope);
  return tape.segment_softmax(scores, s.pair_node(), s.num_nodes());
}

std::vector<double> fs_coefficients(const Hypergraph& g, const Tensor& node_hidden,
                                    const Tensor& edge_hidden, const Tensor& attention,
                                    double slope) {
  HgnnStructure s(g);
  Tape tape;
  Var c = fs_coefficients(tape, s, tape.constant(node_hidden), tape.constant(edge_hidden),
                          tape.constant(attention), slope);
  return tape.value(c).storage();
}

Var node_update(Tape& tape, const HgnnStructure& s, Var node_hidden, Var edge_hidden, Var coeffs,
                bool activate) {
  Var messages = tape.mul_rows(tape.gather_rows(edge_hidden, s.pair_edge()), coeffs);
  Var incoming = tape.segment_sum(messages, s.pair_node(), s.num_nodes());
  Var pre = tape.add(node_hidden, incoming);
  return activate ? tape.elu(pre) : pre;
}

Tensor node_update(const Hypergraph& g, const Tensor& node_feats, const Tensor& edge_feats,
                   std::span<const double> coeffs, const Tensor& weight, bool activate) {
  HgnnStructure s(g);
  if (coeffs.size() != s.num_pairs()) {
    throw ContractError("node_update: one coefficient per incidence pair required");
  }
  Tape tape;
  Var w = tape.constant(weight);
  Var xw = tape.matmul(tape.constant(node_feats), w);
  Var ew = tape.matmul(tape.constant(edge_feats), w);
  Var c = tape.constant(Tensor::column({coeffs.begin(), coeffs.end()}));
  return tape.value(node_update(tape, s, xw, ew, c, activate));
}

Var forward(Tape& tape, const HgnnStructure& s, Var features, const BoundHgnn& params,
            Branch branch, std::span<const NodeId> eval_ids) {
  if (tape.value(features).rows() != s.num_nodes()) {
    throw ContractError("forward: feature rows do not match node count");
  }
  Var ss;
  if (branch == Branch::kStructural) ss = tape.constant(s.structural_coefficients());
  Var h = features;
  const std::size_t layers = params.weights.size();
  for (std::size_t t = 0; t < layers; ++t) {
    Var xw = tape.matmul(h, params.weights[t]);
    // The mean commutes with the linear map, so aggregating x w gives x_e w.
    Var ew = aggregate_hyperedges(tape, s, xw);
    Var coeffs = branch == Branch::kStructural
                     ? ss
                     : fs_coefficients(tape, s, xw, ew, params.attentions[t], params.leaky_slope);
    h = node_update(tape, s, xw, ew, coeffs, t + 1 < layers);
  }
  std::vector<std::uint32_t> rows(eval_ids.begin(), eval_ids.end());
  return tape.gather_rows(h, rows);
}

Tensor forward(const HgnnStructure& s, const Tensor& features, const HgnnParams& params,
               Branch branch, std::span<const NodeId> eval_ids) {
  Tape tape;
  BoundHgnn b = bind(tape, params);
  return tape.value(forward(tape, s, tape.constant(features), b, branch, eval_ids));
}

Var per_sample_ce(Tape& tape, Var logits, std::span<const std::uint32_t> labels) {
  return tape.scale(tape.select_cols(tape.row_log_softmax(logits), labels), -1.0);
}

double ce_loss(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw ContractError("ce_loss: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double x : logits) acc += std::exp(x - mx);
  return mx + std::log(acc) - logits[label];
}

ForwardOutput branch_losses(const HgnnStructure& s, const Tensor& features,
                            std::span<const int> labels, const HgnnParams& params,
                            std::span<const NodeId> ids) {
  const auto targets = checked_labels(labels, ids, params.output_dim());
  ForwardOutput out;
  for (Branch b : {Branch::kStructural, Branch::kFeature}) {
    Tape tape;
    BoundHgnn bound = bind(tape, params);
    Var logits = forward(tape, s, tape.constant(features), bound, b, ids);
    Var losses = per_sample_ce(tape, logits, targets);
    const auto& lv = tape.value(losses).storage();
    if (b == Branch::kStructural) {
      out.logits_ss = tape.value(logits);
      out.loss_ss = lv;
    } else {
      out.logits_fs = tape.value(logits);
      out.loss_fs = lv;
    }
  }
  return out;
}

}  // namespace omahgnn
