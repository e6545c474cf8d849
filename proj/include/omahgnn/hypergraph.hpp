#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace omahgnn {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

/// Immutable hypergraph stored as both halves of the incidence matrix H:
/// node -> incident hyperedges and hyperedge -> member nodes, each sorted.
class Hypergraph {
 public:
  Hypergraph() = default;

  /// Builds from member lists. Members are sorted; duplicates within a hyperedge,
  /// empty hyperedges and ids >= num_nodes throw DataError.
  static Hypergraph from_hyperedges(std::size_t num_nodes,
                                    std::vector<std::vector<NodeId>> hyperedges);

  std::size_t num_nodes() const noexcept { return node_offsets_.empty() ? 0 : node_offsets_.size() - 1; }
  std::size_t num_hyperedges() const noexcept { return edge_offsets_.empty() ? 0 : edge_offsets_.size() - 1; }
  std::size_t nnz() const noexcept { return edge_members_.size(); }

  /// Sorted hyperedges containing `v`. IndexError when out of range.
  std::span<const EdgeId> incident_edges(NodeId v) const;
  /// Sorted members of `e`. IndexError when out of range.
  std::span<const NodeId> members(EdgeId e) const;

  /// Member lists in hyperedge order, as accepted by from_hyperedges.
  std::vector<std::vector<NodeId>> hyperedge_lists() const;

  friend bool operator==(const Hypergraph&, const Hypergraph&) = default;

 private:
  std::vector<std::size_t> node_offsets_;
  std::vector<EdgeId> node_edges_;
  std::vector<std::size_t> edge_offsets_;
  std::vector<NodeId> edge_members_;
};

std::size_t node_degree(const Hypergraph& g, NodeId v);
/// d_e: mean node degree over the members of `e`.
double hyperedge_avg_degree(const Hypergraph& g, EdgeId e);
/// E{v}: the hyperedges incident to `v`.
std::vector<EdgeId> egonet(const Hypergraph& g, NodeId v);

struct OverlapRatio {
  std::uint64_t size_sum = 0;    // sum of |e| over the egonet
  std::uint64_t union_size = 0;  // |union of e| over the egonet
  double value() const { return static_cast<double>(size_sum) / static_cast<double>(union_size); }
};

/// Exact numerator and denominator of the overlapness; nullopt for an empty egonet.
std::optional<OverlapRatio> overlapness_ratio(const Hypergraph& g, NodeId v);
std::optional<double> overlapness(const Hypergraph& g, NodeId v);

/// Overlapness for a list of nodes, in input order. An empty slot marks a node
/// whose egonet is empty.
struct OverlapVector {
  std::vector<std::optional<double>> values;

  std::size_t size() const noexcept { return values.size(); }
  bool valid(std::size_t i) const { return values.at(i).has_value(); }
};

OverlapVector overlap_vector(const Hypergraph& g, std::span<const NodeId> nodes);

}  // namespace omahgnn
