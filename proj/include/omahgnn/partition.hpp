#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace omahgnn {

struct KMeansOptions {
  std::size_t k = 3;
  std::size_t max_iter = 100;
  double tol = 1e-9;
  // Unused by the quantile initializer; kept so callers can pass one seed everywhere.
  std::uint64_t seed = 0;
};

/// Overlap levels: ascending centroids and one task label per fitted value.
struct Partition {
  std::vector<double> centroids;
  std::vector<std::size_t> labels;
  std::size_t k = 0;
  std::size_t requested_k = 0;
  std::size_t iterations = 0;
  /// Within-cluster sum of squares after each Lloyd iteration.
  std::vector<double> sse_history;

  friend bool operator==(const Partition&, const Partition&) = default;
};

/// Lloyd's algorithm in one dimension.
///
/// Centroids start at the (2j+1)/(2k) quantiles of the sorted values. k is
/// clamped to the number of distinct values, and clusters that collapse onto the
/// same centroid are merged, so the returned centroids are strictly ascending and
/// label 0 is the lowest level. ContractError on empty input or k == 0.
Partition kmeans_1d(std::span<const double> values, const KMeansOptions& options = {});

/// Nearest centroid, ties to the lower index; an undefined value maps to level 0.
std::size_t assign_level(std::optional<double> value, std::span<const double> centroids);

/// Sum over values of squared distance to their labelled centroid.
double within_cluster_sse(std::span<const double> values, std::span<const std::size_t> labels,
                          std::span<const double> centroids);

}  // namespace omahgnn
