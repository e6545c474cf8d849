#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "omahgnn/hypergraph.hpp"
#include "omahgnn/tensor.hpp"

namespace omahgnn {

inline constexpr int kUnlabeled = -1;

struct Splits {
  std::vector<NodeId> train;
  std::vector<NodeId> meta;
  std::vector<NodeId> test;

  friend bool operator==(const Splits&, const Splits&) = default;
};

/// A node-classification problem on one hypergraph.
///
/// On disk a dataset is a directory with four files:
///   hyperedges.txt  one hyperedge per line, whitespace-separated 0-based node ids
///   features.csv    one row per node, comma-separated decimals
///   labels.csv      `node_id,class_id` lines; unlabeled nodes are omitted
///   splits.json     {"train": [...], "meta": [...], "test": [...]}
/// The node count is the number of feature rows and the class count is one more
/// than the largest class id.
struct Dataset {
  std::string name;
  Hypergraph graph;
  Tensor features;
  std::vector<int> labels;  // kUnlabeled when absent
  std::size_t num_classes = 0;
  Splits splits;
  /// 0-based line in hyperedges.txt of each hyperedge (blank lines are skipped).
  std::vector<std::size_t> hyperedge_lines;

  std::size_t num_nodes() const noexcept { return features.rows(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
  bool is_labeled(NodeId v) const { return v < labels.size() && labels[v] != kUnlabeled; }
};

/// Throws DataError when shapes, labels or splits are inconsistent.
void validate(const Dataset& ds);

/// Equality of everything that is written to disk.
bool same_content(const Dataset& a, const Dataset& b);

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

enum class BiasInjection { kNone, kStructureNoise, kFeatureNoise };

const char* to_string(BiasInjection b);

/// Planted-community hypergraph.
struct SyntheticSpec {
  std::size_t num_nodes = 200;
  std::size_t num_classes = 3;
  std::size_t num_hyperedges = 150;
  std::size_t min_size = 2;
  std::size_t max_size = 6;
  double homophily = 0.9;     // chance a member is drawn from the anchor class
  std::size_t feature_dim = 16;
  double feature_noise = 0.5;  // Gaussian std added to the class mean
  double signal = 1.0;         // class k's mean is signal * e_k
  BiasInjection bias = BiasInjection::kNone;
  double bias_fraction = 0.0;
  double train_fraction = 0.2;
  double meta_fraction = 0.2;
  double test_fraction = 0.6;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// ContractError naming the first infeasible field.
void check_synthetic(const SyntheticSpec& spec);

/// Deterministic in `seed`. Structure, rewiring, features and splits draw from
/// separate streams, so a biased variant shares everything else with the
/// unbiased dataset of the same seed.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Fraction of hyperedges whose labelled members span more than one class.
double impure_hyperedge_fraction(const Dataset& ds);

}  // namespace omahgnn
