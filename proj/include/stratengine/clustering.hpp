#pragma once

// K-Means over strategy fingerprints with silhouette model selection,
// distinctiveness scoring, agglomerative clustering over a precomputed
// distance matrix, and cluster-balance statistics.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratengine/fingerprint.hpp"
#include "stratengine/strategy.hpp"

namespace stratengine {

using Point = std::vector<double>;

struct ClusterResult {
  std::vector<std::string> route_ids;  // input order
  std::vector<int> labels;             // labels[i] for route_ids[i]
  int k = 0;
  std::optional<double> silhouette;  // undefined for k == 1
  std::vector<Point> centroids;      // K-Means only
  double sse = 0.0;                  // K-Means only

  int label_of(const std::string &route_id) const;
  std::vector<std::size_t> sizes() const;
};

// Dense symmetric matrix, row-major.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const {
    return d_[i * n_ + j];
  }
  void set(std::size_t i, std::size_t j, double v) {
    d_[i * n_ + j] = v;
    d_[j * n_ + i] = v;
  }
  void set_raw(std::size_t i, std::size_t j, double v) { d_[i * n_ + j] = v; }
  bool symmetric(double tol = 0.0) const;
  const std::vector<double> &data() const { return d_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

std::vector<Point> to_points(std::span<const StrategyFingerprint> fps);
double squared_distance(const Point &a, const Point &b);
DistanceMatrix euclidean_distances(std::span<const Point> points);

struct KMeansOptions {
  int max_iterations = 300;
  int restarts = 10;  // independent k-means++ seedings; best SSE kept
  // When the number of k-subsets of distinct points is at most this, every
  // subset is also tried as a seeding. Makes small inputs reliable.
  std::size_t subset_seed_limit = 512;
};

ClusterResult kmeans(std::span<const Point> points, int k, std::uint64_t seed,
                     const KMeansOptions &options = {});
ClusterResult kmeans(std::span<const StrategyFingerprint> fps, int k,
                     std::uint64_t seed, const KMeansOptions &options = {});

// One Lloyd run from the given initial centroids. sse_trace, when set,
// receives the objective after every assignment step.
ClusterResult lloyd(std::span<const Point> points, std::vector<Point> centroids,
                    int max_iterations, std::vector<double> *sse_trace = nullptr);

double within_cluster_sse(std::span<const Point> points,
                          std::span<const int> labels, int k);

// Mean (b - a) / max(a, b); singleton clusters contribute 0.
double silhouette(const DistanceMatrix &dist, std::span<const int> labels);
double silhouette(std::span<const Point> points, std::span<const int> labels);
double silhouette(std::span<const StrategyFingerprint> fps,
                  std::span<const int> labels);

// Highest silhouette over k in [k_min, k_max]; ties go to the smaller k.
ClusterResult select_k(std::span<const StrategyFingerprint> fps, int k_min,
                       int k_max, std::uint64_t seed,
                       const KMeansOptions &options = {});
ClusterResult select_k(std::span<const Point> points, int k_min, int k_max,
                       std::uint64_t seed, const KMeansOptions &options = {});

// score(c, r) = pass frequency inside c minus pass frequency outside c.
struct DistinctivenessTable {
  int k = 0;
  std::vector<std::string> rule_ids;
  std::vector<std::vector<double>> scores;  // [cluster][rule]

  double at(int cluster, const std::string &rule_id) const;
  // Highest-scoring rules of a cluster; ties keep library order.
  std::vector<std::pair<std::string, double>> top(int cluster,
                                                  std::size_t n) const;
};

DistinctivenessTable distinctiveness(std::span<const StrategyFingerprint> fps,
                                     std::span<const int> labels,
                                     const RuleLibrary &library);

enum class Linkage { single, complete, average };

Linkage parse_linkage(const std::string &text);

ClusterResult agglomerative(const DistanceMatrix &dist, Linkage linkage, int k);

ClusterResult select_k_agglomerative(const DistanceMatrix &dist,
                                     Linkage linkage, int k_min, int k_max);

struct BalanceStats {
  std::vector<double> size_stddevs;  // per result, population convention
  double mean_size_stddev = 0.0;
  double mean_k = 0.0;
  std::map<int, int> k_histogram;
};

double population_stddev(std::span<const std::size_t> sizes);
BalanceStats balance_stats(std::span<const ClusterResult> results);

}  // namespace stratengine
