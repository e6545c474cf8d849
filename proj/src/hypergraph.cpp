#include "omahgnn/hypergraph.hpp"

#include <algorithm>
#include <string>

#include "omahgnn/error.hpp"

namespace omahgnn {

Hypergraph Hypergraph::from_hyperedges(std::size_t num_nodes,
                                       std::vector<std::vector<NodeId>> hyperedges) {
  Hypergraph g;
  g.edge_offsets_.reserve(hyperedges.size() + 1);
  g.edge_offsets_.push_back(0);
  std::vector<std::size_t> degree(num_nodes, 0);
  for (std::size_t e = 0; e < hyperedges.size(); ++e) {
    auto& members = hyperedges[e];
    if (members.empty()) {
      throw DataError(DataErrorCode::kEmptyHyperedge, "hyperedge " + std::to_string(e) + " has no members");
    }
    std::sort(members.begin(), members.end());
    if (std::adjacent_find(members.begin(), members.end()) != members.end()) {
      throw DataError(DataErrorCode::kDuplicateMembership,
                      "hyperedge " + std::to_string(e) + " lists a node twice");
    }
    if (members.back() >= num_nodes) {
      throw DataError(DataErrorCode::kNodeOutOfRange,
                      "hyperedge " + std::to_string(e) + " references node " +
                          std::to_string(members.back()) + " but there are " +
                          std::to_string(num_nodes) + " nodes");
    }
    for (NodeId v : members) ++degree[v];
    g.edge_members_.insert(g.edge_members_.end(), members.begin(), members.end());
    g.edge_offsets_.push_back(g.edge_members_.size());
  }

  g.node_offsets_.assign(num_nodes + 1, 0);
  for (std::size_t v = 0; v < num_nodes; ++v) g.node_offsets_[v + 1] = g.node_offsets_[v] + degree[v];
  g.node_edges_.resize(g.edge_members_.size());
  std::vector<std::size_t> cursor(g.node_offsets_.begin(), g.node_offsets_.end() - 1);
  // Visiting hyperedges in increasing id keeps every node's list sorted.
  for (std::size_t e = 0; e + 1 < g.edge_offsets_.size(); ++e) {
    for (std::size_t k = g.edge_offsets_[e]; k < g.edge_offsets_[e + 1]; ++k) {
      g.node_edges_[cursor[g.edge_members_[k]]++] = static_cast<EdgeId>(e);
    }
  }
  return g;
}

std::span<const EdgeId> Hypergraph::incident_edges(NodeId v) const {
  if (v >= num_nodes()) {
    throw IndexError("node " + std::to_string(v) + " out of range " + std::to_string(num_nodes()));
  }
  return {node_edges_.data() + node_offsets_[v], node_offsets_[v + 1] - node_offsets_[v]};
}

std::span<const NodeId> Hypergraph::members(EdgeId e) const {
  if (e >= num_hyperedges()) {
    throw IndexError("hyperedge " + std::to_string(e) + " out of range " +
                     std::to_string(num_hyperedges()));
  }
  return {edge_members_.data() + edge_offsets_[e], edge_offsets_[e + 1] - edge_offsets_[e]};
}

std::vector<std::vector<NodeId>> Hypergraph::hyperedge_lists() const {
  std::vector<std::vector<NodeId>> out;
  out.reserve(num_hyperedges());
  for (EdgeId e = 0; e < num_hyperedges(); ++e) {
    auto m = members(e);
    out.emplace_back(m.begin(), m.end());
  }
  return out;
}

std::size_t node_degree(const Hypergraph& g, NodeId v) { return g.incident_edges(v).size(); }

double hyperedge_avg_degree(const Hypergraph& g, EdgeId e) {
  auto m = g.members(e);
  std::size_t total = 0;
  for (NodeId v : m) total += node_degree(g, v);
  return static_cast<double>(total) / static_cast<double>(m.size());
}

std::vector<EdgeId> egonet(const Hypergraph& g, NodeId v) {
  auto edges = g.incident_edges(v);
  return {edges.begin(), edges.end()};
}

std::optional<OverlapRatio> overlapness_ratio(const Hypergraph& g, NodeId v) {
  auto edges = g.incident_edges(v);
  if (edges.empty()) return std::nullopt;
  OverlapRatio r;
  std::vector<NodeId> united;
  for (EdgeId e : edges) {
    auto m = g.members(e);
    r.size_sum += m.size();
    united.insert(united.end(), m.begin(), m.end());
  }
  std::sort(united.begin(), united.end());
  r.union_size = static_cast<std::uint64_t>(std::unique(united.begin(), united.end()) - united.begin());
  return r;
}

std::optional<double> overlapness(const Hypergraph& g, NodeId v) {
  auto r = overlapness_ratio(g, v);
  if (!r) return std::nullopt;
  return r->value();
}

OverlapVector overlap_vector(const Hypergraph& g, std::span<const NodeId> nodes) {
  OverlapVector out;
  out.values.reserve(nodes.size());
  for (NodeId v : nodes) out.values.push_back(overlapness(g, v));
  return out;
}

}  // namespace omahgnn
