#include <algorithm>
#include <limits>

#include "stratengine/clustering.hpp"

namespace stratengine {

Linkage parse_linkage(const std::string &text) {
  if (text == "single") return Linkage::single;
  if (text == "complete") return Linkage::complete;
  if (text == "average") return Linkage::average;
  throw Error("unknown linkage '" + text + "' (single|complete|average)");
}

ClusterResult agglomerative(const DistanceMatrix &dist, Linkage linkage,
                            int k) {
  const std::size_t n = dist.size();
  if (n == 0) throw Error("cannot cluster an empty input");
  if (!dist.symmetric()) {
    throw Error("distance matrix is not symmetric with a zero diagonal");
  }
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error("k=" + std::to_string(k) + " invalid for " + std::to_string(n) +
                " points");
  }

  // Clusters are keyed by their smallest member; merging a < b keeps a.
  std::vector<double> d(dist.data());
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < n; ++i) owner[i] = i;
  auto D = [&](std::size_t i, std::size_t j) -> double & { return d[i * n + j]; };

  for (std::size_t clusters = n; clusters > static_cast<std::size_t>(k);
       --clusters) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (active[b] && D(a, b) < best) {
          best = D(a, b);
          ba = a;
          bb = b;
        }
      }
    }
    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == ba || x == bb) continue;
      double da = D(ba, x), db = D(bb, x);
      double merged;
      switch (linkage) {
        case Linkage::single: merged = std::min(da, db); break;
        case Linkage::complete: merged = std::max(da, db); break;
        default:
          merged = (static_cast<double>(size[ba]) * da +
                    static_cast<double>(size[bb]) * db) /
                   static_cast<double>(size[ba] + size[bb]);
      }
      D(ba, x) = D(x, ba) = merged;
    }
    size[ba] += size[bb];
    active[bb] = false;
    for (auto &o : owner) {
      if (o == bb) o = ba;
    }
  }

  ClusterResult result;
  result.k = k;
  std::vector<int> label_of_rep(n, -1);
  int next = 0;
  result.labels.resize(n);
  result.route_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rep = owner[i];
    if (label_of_rep[rep] < 0) label_of_rep[rep] = next++;
    result.labels[i] = label_of_rep[rep];
    result.route_ids[i] = std::to_string(i);
  }
  if (k >= 2) result.silhouette = silhouette(dist, result.labels);
  return result;
}

ClusterResult select_k_agglomerative(const DistanceMatrix &dist,
                                     Linkage linkage, int k_min, int k_max) {
  const std::size_t n = dist.size();
  if (k_min < 2 || k_min > k_max || static_cast<std::size_t>(k_max) + 1 > n) {
    throw Error("k range [" + std::to_string(k_min) + ", " +
                std::to_string(k_max) + "] invalid for " + std::to_string(n) +
                " points (need 2 <= k_min <= k_max <= n-1)");
  }
  ClusterResult best;
  for (int k = k_min; k <= k_max; ++k) {
    auto r = agglomerative(dist, linkage, k);
    if (k == k_min || *r.silhouette > *best.silhouette) best = std::move(r);
  }
  return best;
}

}  // namespace stratengine
