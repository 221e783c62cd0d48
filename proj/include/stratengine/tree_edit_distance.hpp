#pragma once

// Ordered tree edit distance (Zhang-Shasha) with unit insert/delete costs
// and 0/1 relabel cost.

#include <string>
#include <vector>

#include "stratengine/annotations.hpp"
#include "stratengine/clustering.hpp"
#include "stratengine/route.hpp"

namespace stratengine {

// Nodes in preorder; node 0 is the root.
struct LabeledTree {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> children;

  std::size_t size() const { return labels.size(); }
  int add(std::string label, int parent = -1);
};

double tree_edit_distance(const LabeledTree &a, const LabeledTree &b);

// Molecule label "M:<smiles>"; reaction label "R:<reaction string>", or
// "R:" + sorted named-reaction tags when store is given and the step is
// annotated with at least one tag.
LabeledTree labeled_tree(const RouteTree &route,
                         const AnnotationStore *store = nullptr);

double ted(const RouteTree &a, const RouteTree &b,
           const AnnotationStore *store = nullptr);

DistanceMatrix ted_matrix(std::span<const RouteTree> routes,
                          const AnnotationStore *store = nullptr);

}  // namespace stratengine
