#pragma once

// Randomized retrieval fixtures: a small rule library with known labels,
// random fingerprints, random vectors, and a random structured query.

#include <cstdint>
#include <random>
#include <vector>

#include "stratengine/embedding.hpp"
#include "stratengine/fingerprint.hpp"
#include "stratengine/query.hpp"
#include "stratengine/retrieval.hpp"
#include "stratengine/strategy.hpp"
#include "stratengine/tree_edit_distance.hpp"

namespace fixtures {

using namespace stratengine;

struct RetrievalCase {
  RuleLibrary library;
  std::vector<StrategyFingerprint> fps;
  StructuredQuery query;
  VectorFileProvider provider{"random", 6};
  RetrievalMode mode = RetrievalMode::semantic_then_categorical;
  std::size_t top_n = kDefaultTopN;
};

RetrievalCase random_retrieval_case(std::uint64_t seed);

// Random ordered tree of 1..max_nodes nodes over labels {a, b, c}, numbered
// in preorder.
LabeledTree random_labeled_tree(std::mt19937_64 &rng, std::size_t max_nodes);

}  // namespace fixtures
