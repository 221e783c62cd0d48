#include "stratengine/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace stratengine {

int ClusterResult::label_of(const std::string &route_id) const {
  for (std::size_t i = 0; i < route_ids.size(); ++i) {
    if (route_ids[i] == route_id) return labels[i];
  }
  throw Error("route '" + route_id + "' is not in the clustering");
}

std::vector<std::size_t> ClusterResult::sizes() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (int l : labels) ++out[static_cast<std::size_t>(l)];
  return out;
}

bool DistanceMatrix::symmetric(double tol) const {
  for (std::size_t i = 0; i < n_; ++i) {
    if (std::abs((*this)(i, i)) > tol) return false;
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    }
  }
  return true;
}

std::vector<Point> to_points(std::span<const StrategyFingerprint> fps) {
  std::vector<Point> points;
  points.reserve(fps.size());
  for (const auto &fp : fps) {
    if (!fps.empty() && fp.bits.size() != fps.front().bits.size()) {
      throw Error("fingerprints have mixed lengths (" +
                  std::to_string(fps.front().bits.size()) + " vs " +
                  std::to_string(fp.bits.size()) + ")");
    }
    Point p(fp.bits.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = fp.bits.test(i) ? 1 : 0;
    points.push_back(std::move(p));
  }
  return points;
}

double squared_distance(const Point &a, const Point &b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

DistanceMatrix euclidean_distances(std::span<const Point> points) {
  DistanceMatrix m(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      m.set(i, j, std::sqrt(squared_distance(points[i], points[j])));
    }
  }
  return m;
}

double within_cluster_sse(std::span<const Point> points,
                          std::span<const int> labels, int k) {
  if (points.empty()) return 0.0;
  std::size_t dim = points.front().size();
  std::vector<Point> sums(static_cast<std::size_t>(k), Point(dim, 0.0));
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto c = static_cast<std::size_t>(labels[i]);
    ++counts[c];
    for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
  }
  for (std::size_t c = 0; c < sums.size(); ++c) {
    if (counts[c] == 0) continue;
    for (auto &v : sums[c]) v /= static_cast<double>(counts[c]);
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sse += squared_distance(points[i], sums[static_cast<std::size_t>(labels[i])]);
  }
  return sse;
}

namespace {

void check_points(std::span<const Point> points, int k) {
  if (points.empty()) throw Error("cannot cluster an empty input");
  for (const auto &p : points) {
    if (p.size() != points.front().size()) {
      throw Error("points have mixed lengths");
    }
  }
  if (k < 1) throw Error("k must be at least 1");
  if (static_cast<std::size_t>(k) > points.size()) {
    throw Error("k=" + std::to_string(k) + " exceeds the number of points (" +
                std::to_string(points.size()) + ")");
  }
}

// Uniform double in [0, 1) with a bit layout independent of the library.
double unit_draw(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<Point> kmeans_pp(std::span<const Point> points, int k,
                             std::mt19937_64 &rng) {
  std::size_t n = points.size();
  std::vector<Point> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(points[rng() % n]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = squared_distance(points[i], centers[0]);
  }
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng() % n;
    } else {
      double target = unit_draw(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      while (d2[pick] <= 0.0 && pick > 0) --pick;
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
    }
  }
  return centers;
}

// Relabel clusters in order of first appearance.
void normalize_labels(ClusterResult &r) {
  std::vector<int> remap(static_cast<std::size_t>(r.k), -1);
  int next = 0;
  for (int l : r.labels) {
    if (remap[static_cast<std::size_t>(l)] < 0) {
      remap[static_cast<std::size_t>(l)] = next++;
    }
  }
  for (auto &l : r.labels) l = remap[static_cast<std::size_t>(l)];
  if (!r.centroids.empty()) {
    std::vector<Point> reordered(r.centroids.size());
    for (std::size_t c = 0; c < r.centroids.size(); ++c) {
      if (remap[c] >= 0) {
        reordered[static_cast<std::size_t>(remap[c])] = std::move(r.centroids[c]);
      }
    }
    r.centroids = std::move(reordered);
  }
}

bool subsets_at_most(std::size_t n, std::size_t k, std::size_t limit) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (c > static_cast<double>(limit)) return false;
  }
  return true;
}

// Hartigan single-point moves: relocate a point when doing so lowers the
// SSE once both centroids are updated. Escapes many Lloyd fixed points.
void hartigan_refine(std::span<const Point> points, ClusterResult &r,
                     int max_passes) {
  const std::size_t n = points.size();
  const std::size_t k = static_cast<std::size_t>(r.k);
  const std::size_t dim = points.front().size();
  std::vector<std::size_t> counts(k, 0);
  for (int l : r.labels) ++counts[static_cast<std::size_t>(l)];
  for (int pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      auto from = static_cast<std::size_t>(r.labels[i]);
      if (counts[from] < 2) continue;
      double nf = static_cast<double>(counts[from]);
      double removal = nf / (nf - 1.0) * squared_distance(points[i], r.centroids[from]);
      double best_gain = 1e-12;
      std::size_t to = from;
      for (std::size_t c = 0; c < k; ++c) {
        if (c == from) continue;
        double nc = static_cast<double>(counts[c]);
        double gain = removal - nc / (nc + 1.0) * squared_distance(points[i], r.centroids[c]);
        if (gain > best_gain) {
          best_gain = gain;
          to = c;
        }
      }
      if (to == from) continue;
      double nt = static_cast<double>(counts[to]);
      for (std::size_t d = 0; d < dim; ++d) {
        r.centroids[from][d] = (r.centroids[from][d] * nf - points[i][d]) / (nf - 1.0);
        r.centroids[to][d] = (r.centroids[to][d] * nt + points[i][d]) / (nt + 1.0);
      }
      --counts[from];
      ++counts[to];
      r.labels[i] = static_cast<int>(to);
      moved = true;
    }
    if (!moved) break;
  }
  // recompute exactly to avoid drift from incremental updates
  for (auto &c : r.centroids) std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto &c = r.centroids[static_cast<std::size_t>(r.labels[i])];
    for (std::size_t d = 0; d < dim; ++d) c[d] += points[i][d];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (auto &v : r.centroids[c]) v /= static_cast<double>(counts[c]);
  }
  r.sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.sse += squared_distance(points[i], r.centroids[static_cast<std::size_t>(r.labels[i])]);
  }
}

}  // namespace

ClusterResult lloyd(std::span<const Point> points, std::vector<Point> centroids,
                    int max_iterations, std::vector<double> *sse_trace) {
  const std::size_t n = points.size();
  const std::size_t k = centroids.size();
  const std::size_t dim = points.front().size();
  std::vector<int> labels(n, -1);
  std::vector<int> previous;
  ClusterResult result;
  result.k = static_cast<int>(k);

  for (int iter = 0; iter < max_iterations; ++iter) {
    previous = labels;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        double d = squared_distance(points[i], centroids[c]);
        if (d < best) {
          best = d;
          arg = static_cast<int>(c);
        }
      }
      labels[i] = arg;
    }

    // Empty clusters take the point farthest from its centroid among
    // clusters that can spare one.
    std::vector<std::size_t> counts(k, 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      double far = -1.0;
      std::size_t pick = 0;
      for (std::size_t i = 0; i < n; ++i) {
        auto own = static_cast<std::size_t>(labels[i]);
        if (counts[own] < 2) continue;
        double d = squared_distance(points[i], centroids[own]);
        if (d > far) {
          far = d;
          pick = i;
        }
      }
      --counts[static_cast<std::size_t>(labels[pick])];
      labels[pick] = static_cast<int>(c);
      counts[c] = 1;
      centroids[c] = points[pick];
    }

    for (auto &c : centroids) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto &c = centroids[static_cast<std::size_t>(labels[i])];
      for (std::size_t d = 0; d < dim; ++d) c[d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (auto &v : centroids[c]) v /= static_cast<double>(counts[c]);
    }
    if (sse_trace) {
      double sse = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sse += squared_distance(points[i],
                                centroids[static_cast<std::size_t>(labels[i])]);
      }
      sse_trace->push_back(sse);
    }
    if (labels == previous) break;
  }

  result.labels = std::move(labels);
  result.centroids = std::move(centroids);
  result.sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    result.sse += squared_distance(
        points[i], result.centroids[static_cast<std::size_t>(result.labels[i])]);
  }
  return result;
}

ClusterResult kmeans(std::span<const Point> points, int k, std::uint64_t seed,
                     const KMeansOptions &options) {
  check_points(points, k);
  std::mt19937_64 rng(seed);
  ClusterResult best;
  bool have = false;
  auto consider = [&](std::vector<Point> init) {
    auto candidate = lloyd(points, std::move(init), options.max_iterations);
    hartigan_refine(points, candidate, options.max_iterations);
    if (!have || candidate.sse < best.sse) {
      best = std::move(candidate);
      have = true;
    }
  };
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    consider(kmeans_pp(points, k, rng));
  }
  std::vector<Point> distinct;
  for (const auto &p : points) {
    if (std::find(distinct.begin(), distinct.end(), p) == distinct.end()) {
      distinct.push_back(p);
    }
  }
  auto uk = static_cast<std::size_t>(k);
  if (distinct.size() >= uk &&
      subsets_at_most(distinct.size(), uk, options.subset_seed_limit)) {
    std::vector<std::size_t> pick(uk);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    while (true) {
      std::vector<Point> init;
      for (auto i : pick) init.push_back(distinct[i]);
      consider(std::move(init));
      std::size_t j = uk;
      while (j > 0 && pick[j - 1] == distinct.size() - uk + j - 1) --j;
      if (j == 0) break;
      ++pick[j - 1];
      for (std::size_t m = j; m < uk; ++m) pick[m] = pick[m - 1] + 1;
    }
  }
  normalize_labels(best);
  best.route_ids.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    best.route_ids[i] = std::to_string(i);
  }
  if (k >= 2) best.silhouette = silhouette(points, best.labels);
  return best;
}

ClusterResult kmeans(std::span<const StrategyFingerprint> fps, int k,
                     std::uint64_t seed, const KMeansOptions &options) {
  auto points = to_points(fps);
  auto result = kmeans(std::span<const Point>(points), k, seed, options);
  for (std::size_t i = 0; i < fps.size(); ++i) {
    result.route_ids[i] = fps[i].route_id;
  }
  return result;
}

double silhouette(const DistanceMatrix &dist, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (dist.size() != n) throw Error("silhouette: label count mismatch");
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw Error("silhouette undefined for k=1");
  int max_label = *distinct.rbegin();
  if (*distinct.begin() < 0) throw Error("silhouette: negative label");
  std::vector<std::size_t> counts(static_cast<std::size_t>(max_label) + 1, 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];

  double total = 0.0;
  std::vector<double> sums(counts.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto own = static_cast<std::size_t>(labels[i]);
    if (counts[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[static_cast<std::size_t>(labels[j])] += dist(i, j);
    }
    double a = sums[own] / static_cast<double>(counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (c == own || counts[c] == 0) continue;
      b = std::min(b, sums[c] / static_cast<double>(counts[c]));
    }
    double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double silhouette(std::span<const Point> points, std::span<const int> labels) {
  return silhouette(euclidean_distances(points), labels);
}

double silhouette(std::span<const StrategyFingerprint> fps,
                  std::span<const int> labels) {
  auto points = to_points(fps);
  return silhouette(std::span<const Point>(points), labels);
}

namespace {

void check_k_range(int k_min, int k_max, std::size_t n) {
  if (k_min < 2 || k_min > k_max ||
      static_cast<std::size_t>(k_max) + 1 > n) {
    throw Error("k range [" + std::to_string(k_min) + ", " +
                std::to_string(k_max) + "] invalid for " + std::to_string(n) +
                " points (need 2 <= k_min <= k_max <= n-1)");
  }
}

template <typename Run>
ClusterResult best_by_silhouette(int k_min, int k_max, Run &&run) {
  std::vector<ClusterResult> runs(static_cast<std::size_t>(k_max - k_min + 1));
  parallel_for(runs.size(),
               [&](std::size_t i) { runs[i] = run(k_min + static_cast<int>(i)); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (*runs[i].silhouette > *runs[best].silhouette) best = i;
  }
  return std::move(runs[best]);
}

}  // namespace

ClusterResult select_k(std::span<const Point> points, int k_min, int k_max,
                       std::uint64_t seed, const KMeansOptions &options) {
  check_k_range(k_min, k_max, points.size());
  return best_by_silhouette(
      k_min, k_max, [&](int k) { return kmeans(points, k, seed, options); });
}

ClusterResult select_k(std::span<const StrategyFingerprint> fps, int k_min,
                       int k_max, std::uint64_t seed,
                       const KMeansOptions &options) {
  auto points = to_points(fps);
  auto result = select_k(std::span<const Point>(points), k_min, k_max, seed,
                         options);
  for (std::size_t i = 0; i < fps.size(); ++i) {
    result.route_ids[i] = fps[i].route_id;
  }
  return result;
}

double DistinctivenessTable::at(int cluster, const std::string &rule_id) const {
  for (std::size_t r = 0; r < rule_ids.size(); ++r) {
    if (rule_ids[r] == rule_id) {
      return scores.at(static_cast<std::size_t>(cluster))[r];
    }
  }
  throw Error("rule '" + rule_id + "' is not in the distinctiveness table");
}

std::vector<std::pair<std::string, double>> DistinctivenessTable::top(
    int cluster, std::size_t n) const {
  const auto &row = scores.at(static_cast<std::size_t>(cluster));
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < std::min(n, order.size()); ++i) {
    out.emplace_back(rule_ids[order[i]], row[order[i]]);
  }
  return out;
}

DistinctivenessTable distinctiveness(std::span<const StrategyFingerprint> fps,
                                     std::span<const int> labels,
                                     const RuleLibrary &library) {
  if (fps.size() != labels.size()) {
    throw Error("distinctiveness: label count mismatch");
  }
  DistinctivenessTable table;
  for (const auto &r : library.rules()) table.rule_ids.push_back(r.rule_id);
  int k = 0;
  for (int l : labels) {
    if (l < 0) throw Error("distinctiveness: negative label");
    k = std::max(k, l + 1);
  }
  table.k = k;
  const std::size_t n = fps.size();
  const std::size_t m = library.size();
  std::vector<std::size_t> members(static_cast<std::size_t>(k), 0);
  std::vector<std::vector<std::size_t>> passing(
      static_cast<std::size_t>(k), std::vector<std::size_t>(m, 0));
  std::vector<std::size_t> total(m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (fps[i].bits.size() != m) {
      throw Error("fingerprint length does not match library size");
    }
    auto c = static_cast<std::size_t>(labels[i]);
    ++members[c];
    for (std::size_t r = 0; r < m; ++r) {
      if (fps[i].bits.test(r)) {
        ++passing[c][r];
        ++total[r];
      }
    }
  }
  table.scores.assign(static_cast<std::size_t>(k), std::vector<double>(m, 0.0));
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c] == 0) {
      throw Error("cluster " + std::to_string(c) + " has no members");
    }
    std::size_t outside = n - members[c];
    for (std::size_t r = 0; r < m; ++r) {
      double in = static_cast<double>(passing[c][r]) /
                  static_cast<double>(members[c]);
      double out = outside == 0 ? 0.0
                                : static_cast<double>(total[r] - passing[c][r]) /
                                      static_cast<double>(outside);
      table.scores[c][r] = in - out;
    }
  }
  return table;
}

double population_stddev(std::span<const std::size_t> sizes) {
  if (sizes.empty()) return 0.0;
  double mean = 0.0;
  for (auto s : sizes) mean += static_cast<double>(s);
  mean /= static_cast<double>(sizes.size());
  double var = 0.0;
  for (auto s : sizes) {
    double d = static_cast<double>(s) - mean;
    var += d * d;
  }
  return std::sqrt(var / static_cast<double>(sizes.size()));
}

BalanceStats balance_stats(std::span<const ClusterResult> results) {
  if (results.empty()) throw Error("balance_stats needs at least one result");
  BalanceStats stats;
  double k_sum = 0.0;
  for (const auto &r : results) {
    auto sizes = r.sizes();
    stats.size_stddevs.push_back(population_stddev(sizes));
    ++stats.k_histogram[r.k];
    k_sum += r.k;
  }
  stats.mean_size_stddev =
      std::accumulate(stats.size_stddevs.begin(), stats.size_stddevs.end(),
                      0.0) /
      static_cast<double>(results.size());
  stats.mean_k = k_sum / static_cast<double>(results.size());
  return stats;
}

}  // namespace stratengine
