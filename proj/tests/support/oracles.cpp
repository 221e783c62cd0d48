#include "oracles.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>

namespace oracles {

namespace {

struct TreeInfo {
  std::vector<int> pre;                    // preorder rank per node
  std::vector<std::vector<char>> ancestor;  // ancestor[u][v]: u is a proper ancestor of v
};

TreeInfo info(const LabeledTree &t) {
  const std::size_t n = t.labels.size();
  std::vector<int> parent(n, -1);
  for (std::size_t u = 0; u < n; ++u)
    for (int c : t.children[u]) parent[static_cast<std::size_t>(c)] = static_cast<int>(u);
  TreeInfo ti;
  ti.pre.assign(n, 0);
  ti.ancestor.assign(n, std::vector<char>(n, 0));
  int next = 0;
  std::function<void(int)> walk = [&](int u) {
    ti.pre[static_cast<std::size_t>(u)] = next++;
    for (int c : t.children[static_cast<std::size_t>(u)]) walk(c);
  };
  for (std::size_t u = 0; u < n; ++u)
    if (parent[u] < 0) walk(static_cast<int>(u));
  for (std::size_t v = 0; v < n; ++v)
    for (int p = parent[v]; p >= 0; p = parent[static_cast<std::size_t>(p)])
      ti.ancestor[static_cast<std::size_t>(p)][v] = 1;
  return ti;
}

}  // namespace

double brute_force_ted(const LabeledTree &a, const LabeledTree &b) {
  const std::size_t na = a.labels.size(), nb = b.labels.size();
  auto ia = info(a), ib = info(b);
  std::vector<int> map_to(na, -1);
  std::vector<char> used(nb, 0);
  double best = static_cast<double>(na + nb);

  std::function<void(std::size_t, std::size_t, double)> go = [&](std::size_t u, std::size_t mapped,
                                                                 double relabels) {
    if (u == na) {
      double cost = relabels + static_cast<double>(na - mapped) + static_cast<double>(nb - mapped);
      best = std::min(best, cost);
      return;
    }
    go(u + 1, mapped, relabels);
    for (std::size_t v = 0; v < nb; ++v) {
      if (used[v]) continue;
      bool ok = true;
      for (std::size_t w = 0; w < u && ok; ++w) {
        if (map_to[w] < 0) continue;
        auto x = static_cast<std::size_t>(map_to[w]);
        ok = ia.ancestor[w][u] == ib.ancestor[x][v] && ia.ancestor[u][w] == ib.ancestor[v][x] &&
             (ia.pre[w] < ia.pre[u]) == (ib.pre[x] < ib.pre[v]);
      }
      if (!ok) continue;
      map_to[u] = static_cast<int>(v);
      used[v] = 1;
      go(u + 1, mapped + 1, relabels + (a.labels[u] == b.labels[v] ? 0.0 : 1.0));
      used[v] = 0;
      map_to[u] = -1;
    }
  };
  go(0, 0, 0.0);
  return best;
}

namespace {

double sse_of(const std::vector<Point> &points, const std::vector<int> &labels, int k) {
  const std::size_t d = points.empty() ? 0 : points[0].size();
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    std::vector<double> mean(d, 0.0);
    int count = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (labels[i] != c) continue;
      ++count;
      for (std::size_t j = 0; j < d; ++j) mean[j] += points[i][j];
    }
    for (auto &m : mean) m /= count;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (labels[i] != c) continue;
      for (std::size_t j = 0; j < d; ++j) total += (points[i][j] - mean[j]) * (points[i][j] - mean[j]);
    }
  }
  return total;
}

}  // namespace

double exhaustive_min_sse(const std::vector<Point> &points, int k) {
  const std::size_t n = points.size();
  std::vector<int> labels(n, 0);
  double best = std::numeric_limits<double>::infinity();
  // Restricted growth strings enumerate each set partition once.
  std::function<void(std::size_t, int)> go = [&](std::size_t i, int used) {
    if (i == n) {
      if (used == k) best = std::min(best, sse_of(points, labels, k));
      return;
    }
    if (used + static_cast<int>(n - i) < k) return;
    for (int c = 0; c <= used && c < k; ++c) {
      labels[i] = c;
      go(i + 1, std::max(used, c + 1));
    }
  };
  go(0, 0);
  return best;
}

double direct_silhouette(const std::vector<Point> &points, const std::vector<int> &labels) {
  const std::size_t n = points.size();
  auto dist = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t d = 0; d < points[i].size(); ++d) {
      double diff = points[i][d] - points[j][d];
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto &own = members[labels[i]];
    if (own.size() == 1) continue;
    double a = 0.0;
    for (auto j : own) if (j != i) a += dist(i, j);
    a /= static_cast<double>(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto &[c, other] : members) {
      if (c == labels[i]) continue;
      double m = 0.0;
      for (auto j : other) m += dist(i, j);
      b = std::min(b, m / static_cast<double>(other.size()));
    }
    double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

std::vector<std::vector<double>> counted_distinctiveness(
    const std::vector<StrategyFingerprint> &fps, const std::vector<int> &labels,
    std::size_t rule_count) {
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  std::vector<std::vector<double>> scores(static_cast<std::size_t>(k),
                                          std::vector<double>(rule_count, 0.0));
  for (int c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < rule_count; ++r) {
      int in = 0, in_pass = 0, out = 0, out_pass = 0;
      for (std::size_t i = 0; i < fps.size(); ++i) {
        bool pass = fps[i].bits.test(r);
        if (labels[i] == c) {
          ++in;
          in_pass += pass;
        } else {
          ++out;
          out_pass += pass;
        }
      }
      double fin = static_cast<double>(in_pass) / in;
      double fout = out ? static_cast<double>(out_pass) / out : 0.0;
      scores[static_cast<std::size_t>(c)][r] = fin - fout;
    }
  }
  return scores;
}

namespace {

bool contains_all(const std::set<std::string> &have, const std::set<std::string> &need) {
  for (const auto &x : need)
    if (!have.count(x)) return false;
  return true;
}

double dot(const Embedding &a, const Embedding &b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

}  // namespace

std::vector<NaiveResult> naive_search(const StructuredQuery &query, const RuleLibrary &library,
                                      const std::vector<StrategyFingerprint> &fps,
                                      const EmbeddingProvider &provider, RetrievalMode mode,
                                      std::size_t top_n) {
  const std::size_t m = library.size();
  std::vector<Embedding> rule_vec(m);
  for (std::size_t r = 0; r < m; ++r) {
    auto v = provider.lookup(library[r].rule_id);
    rule_vec[r] = v ? *v : provider.embed_one(library[r].description);
  }

  const std::size_t nsub = query.subqueries.size();
  std::vector<std::vector<char>> is_candidate(nsub, std::vector<char>(m, 0));
  std::vector<std::vector<double>> sim(nsub, std::vector<double>(m, 0.0));
  for (std::size_t s = 0; s < nsub; ++s) {
    const auto &sq = query.subqueries[s];
    auto qv = provider.embed_one(sq.description);
    for (std::size_t r = 0; r < m; ++r) sim[s][r] = dot(qv, rule_vec[r]);
    // Semantic rank of each rule: count of rules strictly ahead of it.
    std::vector<std::size_t> rank(m, 0);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t o = 0; o < m; ++o)
        if (sim[s][o] > sim[s][r] || (sim[s][o] == sim[s][r] && o < r)) ++rank[r];
    for (std::size_t r = 0; r < m; ++r) {
      const auto &meta = library[r].categorical_meta;
      bool cat = contains_all(meta.reactions, sq.atomic.reactions) &&
                 contains_all(meta.fgs, sq.atomic.fgs) && contains_all(meta.rings, sq.atomic.rings);
      bool sem = rank[r] < top_n;
      bool pick = false;
      switch (mode) {
        case RetrievalMode::cat_only:
        case RetrievalMode::cat_sem_rerank: pick = cat; break;
        case RetrievalMode::sem_only: pick = sem; break;
        case RetrievalMode::semantic_then_categorical: pick = sem && cat; break;
      }
      is_candidate[s][r] = pick;
    }
  }

  bool has_positive = false;
  for (const auto &sq : query.subqueries) has_positive |= !sq.negated;

  std::vector<NaiveResult> out;
  for (const auto &fp : fps) {
    bool in_pool = !has_positive;
    int count = 0;
    double sum = 0.0;
    int scored = 0;
    for (std::size_t s = 0; s < nsub; ++s) {
      int hits = 0;
      double ssum = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        if (is_candidate[s][r] && fp.bits.test(r)) {
          ++hits;
          ssum += sim[s][r];
        }
      }
      if (query.subqueries[s].negated) {
        if (hits == 0) ++count;
      } else if (hits > 0) {
        in_pool = true;
        ++count;
        sum += ssum / hits;
        ++scored;
      }
    }
    if (!in_pool) continue;
    bool keep = query.combinator == Combinator::all_of ? count == static_cast<int>(nsub) : count > 0;
    if (keep) out.push_back({fp.route_id, count, scored ? sum / scored : 0.0});
  }
  // Insertion sort against the reference key.
  auto before = [](const NaiveResult &x, const NaiveResult &y) {
    if (x.match_count != y.match_count) return x.match_count > y.match_count;
    if (x.rank_score != y.rank_score) return x.rank_score > y.rank_score;
    return x.route_id < y.route_id;
  };
  for (std::size_t i = 1; i < out.size(); ++i) {
    for (std::size_t j = i; j > 0 && before(out[j], out[j - 1]); --j) std::swap(out[j], out[j - 1]);
  }
  return out;
}

}  // namespace oracles
