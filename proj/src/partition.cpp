#include "omahgnn/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "omahgnn/error.hpp"

namespace omahgnn {

namespace {

std::size_t nearest(double x, std::span<const double> centroids) {
  std::size_t best = 0;
  double best_dist = std::abs(x - centroids[0]);
  for (std::size_t j = 1; j < centroids.size(); ++j) {
    const double d = std::abs(x - centroids[j]);
    if (d < best_dist) {
      best = j;
      best_dist = d;
    }
  }
  return best;
}

void assign_all(std::span<const double> values, std::span<const double> centroids,
                std::vector<std::size_t>& labels) {
  for (std::size_t i = 0; i < values.size(); ++i) labels[i] = nearest(values[i], centroids);
}

// An empty cluster is reseeded at the value farthest from its nearest centroid.
void repair_empty(std::span<const double> values, std::vector<double>& centroids,
                  std::vector<std::size_t>& labels) {
  for (std::size_t guard = 0; guard < centroids.size(); ++guard) {
    std::vector<std::size_t> count(centroids.size(), 0);
    for (auto l : labels) ++count[l];
    auto empty = std::find(count.begin(), count.end(), 0u);
    if (empty == count.end()) return;
    std::size_t far = 0;
    double far_dist = -1.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = std::abs(values[i] - centroids[labels[i]]);
      if (d > far_dist) {
        far = i;
        far_dist = d;
      }
    }
    centroids[static_cast<std::size_t>(empty - count.begin())] = values[far];
    assign_all(values, centroids, labels);
  }
}

struct LloydResult {
  std::vector<double> centroids;
  std::vector<std::size_t> labels;
  std::size_t iterations = 0;
  std::vector<double> sse_history;
};

LloydResult lloyd(std::span<const double> values, std::vector<double> centroids,
                  const KMeansOptions& options) {
  LloydResult r;
  r.labels.assign(values.size(), 0);
  assign_all(values, centroids, r.labels);
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    repair_empty(values, centroids, r.labels);
    std::vector<double> sum(centroids.size(), 0.0);
    std::vector<std::size_t> count(centroids.size(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum[r.labels[i]] += values[i];
      ++count[r.labels[i]];
    }
    double movement = 0.0;
    for (std::size_t j = 0; j < centroids.size(); ++j) {
      if (count[j] == 0) continue;
      const double updated = sum[j] / static_cast<double>(count[j]);
      movement = std::max(movement, std::abs(updated - centroids[j]));
      centroids[j] = updated;
    }
    r.sse_history.push_back(within_cluster_sse(values, r.labels, centroids));
    r.iterations = it + 1;
    assign_all(values, centroids, r.labels);
    if (movement < options.tol) break;
  }
  r.centroids = std::move(centroids);
  return r;
}

// Exact k-segment optimum over sorted values. Optimal 1-D clusters are
// contiguous in sorted order, so a prefix-sum DP over split points finds it.
std::vector<double> optimal_centroids(std::vector<double> sorted, std::size_t k) {
  const std::size_t n = sorted.size();
  std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s1[i + 1] = s1[i] + sorted[i];
    s2[i + 1] = s2[i] + sorted[i] * sorted[i];
  }
  auto cost = [&](std::size_t i, std::size_t j) {  // segment [i, j)
    const double m = static_cast<double>(j - i);
    const double s = s1[j] - s1[i];
    return std::max(0.0, (s2[j] - s2[i]) - s * s / m);
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dp(k + 1, std::vector<double>(n + 1, inf));
  std::vector<std::vector<std::size_t>> cut(k + 1, std::vector<std::size_t>(n + 1, 0));
  dp[0][0] = 0.0;
  for (std::size_t c = 1; c <= k; ++c) {
    for (std::size_t j = c; j <= n; ++j) {
      for (std::size_t i = c - 1; i < j; ++i) {
        if (dp[c - 1][i] == inf) continue;
        const double v = dp[c - 1][i] + cost(i, j);
        if (v < dp[c][j]) {
          dp[c][j] = v;
          cut[c][j] = i;
        }
      }
    }
  }
  std::vector<double> centroids(k);
  std::size_t j = n;
  for (std::size_t c = k; c >= 1; --c) {
    const std::size_t i = cut[c][j];
    centroids[c - 1] = (s1[j] - s1[i]) / static_cast<double>(j - i);
    j = i;
  }
  return centroids;
}

}  // namespace

double within_cluster_sse(std::span<const double> values, std::span<const std::size_t> labels,
                          std::span<const double> centroids) {
  double sse = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - centroids[labels[i]];
    sse += d * d;
  }
  return sse;
}

Partition kmeans_1d(std::span<const double> values, const KMeansOptions& options) {
  if (values.empty()) throw ContractError("kmeans_1d: no values");
  if (options.k == 0) throw ContractError("kmeans_1d: k must be at least 1");
  for (double v : values) {
    if (!std::isfinite(v)) throw ContractError("kmeans_1d: non-finite value");
  }

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) distinct += sorted[i] != sorted[i - 1];
  const std::size_t k = std::min(options.k, distinct);

  const std::size_t n = sorted.size();
  std::vector<double> init(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double q = static_cast<double>(2 * j + 1) / static_cast<double>(2 * k);
    init[j] = sorted[std::min(n - 1, static_cast<std::size_t>(q * static_cast<double>(n)))];
  }
  LloydResult fit = lloyd(values, std::move(init), options);

  // Lloyd can stop at a local optimum; restart from the exact optimum when it is better.
  if (k > 1) {
    std::vector<double> best = optimal_centroids(sorted, k);
    std::vector<std::size_t> best_labels(values.size());
    assign_all(values, best, best_labels);
    const double best_sse = within_cluster_sse(values, best_labels, best);
    const double fit_sse = within_cluster_sse(values, fit.labels, fit.centroids);
    if (best_sse < fit_sse - 1e-12 * std::max(1.0, fit_sse)) {
      LloydResult polished = lloyd(values, std::move(best), options);
      polished.iterations += fit.iterations;
      polished.sse_history.insert(polished.sse_history.begin(), fit.sse_history.begin(),
                                  fit.sse_history.end());
      fit = std::move(polished);
    }
  }

  // Drop clusters left without members, then order levels by centroid.
  std::vector<std::size_t> count(k, 0);
  for (auto l : fit.labels) ++count[l];
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < k; ++j)
    if (count[j] > 0) order.push_back(j);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fit.centroids[a] < fit.centroids[b];
  });
  std::vector<std::size_t> relabel(k, 0);
  Partition p;
  for (std::size_t r = 0; r < order.size(); ++r) {
    relabel[order[r]] = r;
    p.centroids.push_back(fit.centroids[order[r]]);
  }
  p.labels.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) p.labels[i] = relabel[fit.labels[i]];
  p.k = p.centroids.size();
  p.requested_k = options.k;
  p.iterations = fit.iterations;
  p.sse_history = std::move(fit.sse_history);
  return p;
}

std::size_t assign_level(std::optional<double> value, std::span<const double> centroids) {
  if (centroids.empty()) throw ContractError("assign_level: no centroids");
  if (!value) return 0;
  return nearest(*value, centroids);
}

}  // namespace omahgnn
