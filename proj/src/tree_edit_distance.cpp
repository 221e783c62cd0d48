#include "stratengine/tree_edit_distance.hpp"

#include <algorithm>

namespace stratengine {

int LabeledTree::add(std::string label, int parent) {
  int id = static_cast<int>(labels.size());
  labels.push_back(std::move(label));
  children.emplace_back();
  if (parent >= 0) children[static_cast<std::size_t>(parent)].push_back(id);
  return id;
}

namespace {

// Postorder view with 1-based indices, as in the Zhang-Shasha recurrences.
struct Postorder {
  std::vector<const std::string *> label;  // [1..n]
  std::vector<int> leftmost;               // [1..n]
  std::vector<int> keyroots;

  explicit Postorder(const LabeledTree &t) {
    const std::size_t n = t.size();
    label.assign(n + 1, nullptr);
    leftmost.assign(n + 1, 0);
    if (n == 0) return;
    int counter = 0;
    auto visit = [&](auto &&self, int node) -> int {
      int first_leaf = -1;
      for (int c : t.children[static_cast<std::size_t>(node)]) {
        int l = self(self, c);
        if (first_leaf < 0) first_leaf = l;
      }
      int post = ++counter;
      label[static_cast<std::size_t>(post)] =
          &t.labels[static_cast<std::size_t>(node)];
      leftmost[static_cast<std::size_t>(post)] =
          first_leaf < 0 ? post : first_leaf;
      return leftmost[static_cast<std::size_t>(post)];
    };
    visit(visit, 0);
    std::vector<bool> seen(n + 1, false);
    for (int i = static_cast<int>(n); i >= 1; --i) {
      auto l = static_cast<std::size_t>(leftmost[static_cast<std::size_t>(i)]);
      if (!seen[l]) {
        keyroots.push_back(i);
        seen[l] = true;
      }
    }
    std::sort(keyroots.begin(), keyroots.end());
  }
};

}  // namespace

double tree_edit_distance(const LabeledTree &a, const LabeledTree &b) {
  const int n1 = static_cast<int>(a.size());
  const int n2 = static_cast<int>(b.size());
  if (n1 == 0 || n2 == 0) return static_cast<double>(n1 + n2);
  Postorder pa(a), pb(b);
  const auto w = static_cast<std::size_t>(n2 + 1);
  std::vector<int> td(static_cast<std::size_t>(n1 + 1) * w, 0);
  std::vector<int> fd(static_cast<std::size_t>(n1 + 1) * w, 0);
  auto TD = [&](int i, int j) -> int & {
    return td[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)];
  };
  auto FD = [&](int i, int j) -> int & {
    return fd[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)];
  };
  const auto &l1 = pa.leftmost;
  const auto &l2 = pb.leftmost;

  for (int i : pa.keyroots) {
    for (int j : pb.keyroots) {
      int i0 = l1[static_cast<std::size_t>(i)] - 1;
      int j0 = l2[static_cast<std::size_t>(j)] - 1;
      FD(i0, j0) = 0;
      for (int di = i0 + 1; di <= i; ++di) FD(di, j0) = FD(di - 1, j0) + 1;
      for (int dj = j0 + 1; dj <= j; ++dj) FD(i0, dj) = FD(i0, dj - 1) + 1;
      for (int di = i0 + 1; di <= i; ++di) {
        for (int dj = j0 + 1; dj <= j; ++dj) {
          int del = FD(di - 1, dj) + 1;
          int ins = FD(di, dj - 1) + 1;
          if (l1[static_cast<std::size_t>(di)] == l1[static_cast<std::size_t>(i)] &&
              l2[static_cast<std::size_t>(dj)] == l2[static_cast<std::size_t>(j)]) {
            int ren = *pa.label[static_cast<std::size_t>(di)] ==
                              *pb.label[static_cast<std::size_t>(dj)]
                          ? 0
                          : 1;
            FD(di, dj) = std::min({del, ins, FD(di - 1, dj - 1) + ren});
            TD(di, dj) = FD(di, dj);
          } else {
            int sub = FD(l1[static_cast<std::size_t>(di)] - 1,
                         l2[static_cast<std::size_t>(dj)] - 1) +
                      TD(di, dj);
            FD(di, dj) = std::min({del, ins, sub});
          }
        }
      }
    }
  }
  return static_cast<double>(TD(n1, n2));
}

LabeledTree labeled_tree(const RouteTree &route, const AnnotationStore *store) {
  LabeledTree t;
  auto visit = [&](auto &&self, const RouteNode &node, int parent) -> void {
    std::string label;
    if (node.is_molecule()) {
      label = "M:" + node.smiles;
    } else {
      auto forward = forward_reaction(node.reaction_smiles, route.direction);
      const std::set<std::string> *tags =
          store ? store->reaction_tags(reaction_key(forward)) : nullptr;
      if (tags && !tags->empty()) {
        label = "R:";
        bool first = true;
        for (const auto &tag : *tags) {
          if (!first) label += '|';
          label += tag;
          first = false;
        }
      } else {
        label = "R:" + forward;
      }
    }
    int id = t.add(std::move(label), parent);
    for (const auto &c : node.children) self(self, c, id);
  };
  visit(visit, route.root, -1);
  return t;
}

double ted(const RouteTree &a, const RouteTree &b,
           const AnnotationStore *store) {
  return tree_edit_distance(labeled_tree(canonicalize(a), store),
                            labeled_tree(canonicalize(b), store));
}

DistanceMatrix ted_matrix(std::span<const RouteTree> routes,
                          const AnnotationStore *store) {
  std::vector<LabeledTree> trees;
  trees.reserve(routes.size());
  for (const auto &r : routes) trees.push_back(labeled_tree(canonicalize(r), store));
  const std::size_t n = routes.size();
  DistanceMatrix m(n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = tree_edit_distance(trees[i], trees[j]);
      m.set_raw(i, j, d);
      m.set_raw(j, i, d);
    }
  });
  return m;
}

}  // namespace stratengine
