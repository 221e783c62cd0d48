#pragma once

// Strategy retrieval: candidate rule selection per sub-query, inverted
// index lookup, and ranking by (match count, rank score, route id).

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stratengine/embedding.hpp"
#include "stratengine/fingerprint.hpp"
#include "stratengine/query.hpp"
#include "stratengine/strategy.hpp"

namespace stratengine {

enum class RetrievalMode {
  semantic_then_categorical,  // "default"
  cat_only,
  cat_sem_rerank,
  sem_only,
};

RetrievalMode parse_mode(std::string_view text);
std::string_view to_string(RetrievalMode mode);

inline constexpr std::size_t kDefaultTopN = 200;

class InvertedIndex {
 public:
  static InvertedIndex build(std::span<const StrategyFingerprint> fps,
                             const RuleLibrary &library);

  // Throws when the stored hashes differ from the expected ones (pass
  // empty strings to skip a check).
  static InvertedIndex read(std::istream &in,
                            const std::string &expected_corpus_hash = {},
                            const std::string &expected_library_hash = {});
  void write(std::ostream &out) const;

  const std::vector<std::string> &route_ids() const { return route_ids_; }
  const std::vector<std::string> &rule_ids() const { return rule_ids_; }
  // Sorted route positions whose bit for rule i is set.
  const std::vector<std::uint32_t> &postings(std::size_t rule) const {
    return postings_[rule];
  }
  bool contains(std::size_t rule, std::uint32_t route) const;
  const std::string &corpus_hash() const { return corpus_hash_; }
  const std::string &library_hash() const { return library_hash_; }

 private:
  std::vector<std::string> route_ids_;
  std::vector<std::string> rule_ids_;
  std::vector<std::vector<std::uint32_t>> postings_;
  std::string corpus_hash_;
  std::string library_hash_;
};

// Hash binding a set of fingerprints (route ids and bits) together.
std::string fingerprint_corpus_hash(std::span<const StrategyFingerprint> fps);

// One vector per rule, in library order: provider.lookup(rule_id) when
// available, otherwise the embedded description.
std::vector<Embedding> embed_library(const RuleLibrary &library,
                                     const EmbeddingProvider &provider);

// Rule positions selected for a sub-query, in the order the mode defines.
std::vector<std::size_t> candidate_functions(
    const SubQuery &sub, const RuleLibrary &library,
    std::span<const Embedding> rule_vectors, const Embedding &query_vector,
    RetrievalMode mode, std::size_t top_n);

struct RankedResult {
  std::string route_id;
  int match_count = 0;
  double rank_score = 0.0;
  // Satisfied sub-query index -> rule ids that satisfied it (empty for a
  // satisfied negated sub-query).
  std::map<std::size_t, std::vector<std::string>> matched;
};

nlohmann::json to_json(const RankedResult &result);

class Retriever {
 public:
  Retriever(const RuleLibrary &library, const InvertedIndex &index,
            const EmbeddingProvider &provider);
  Retriever(const RuleLibrary &library, const InvertedIndex &index,
            const EmbeddingProvider &provider,
            std::vector<Embedding> rule_vectors);

  std::vector<RankedResult> search(const StructuredQuery &query,
                                   RetrievalMode mode,
                                   std::size_t top_n = kDefaultTopN) const;

  const RuleLibrary &library() const { return library_; }
  const InvertedIndex &index() const { return index_; }
  std::span<const Embedding> rule_vectors() const { return rule_vectors_; }

 private:
  const RuleLibrary &library_;
  const InvertedIndex &index_;
  const EmbeddingProvider &provider_;
  std::vector<Embedding> rule_vectors_;
};

struct BenchmarkCase {
  std::string case_id;
  StructuredQuery query;
  std::string ground_truth;  // route id
};

// {"cases": [{"id": ..., "query": {...}, "ground_truth": "route id"}]}
std::vector<BenchmarkCase> parse_benchmark(std::string_view json_text,
                                           const Vocabularies *vocab = nullptr);

inline const std::vector<int> kDefaultTopK = {1, 3, 5, 10};

// K -> fraction of cases whose ground truth is among the first K results.
std::map<int, double> topk_accuracy(std::span<const BenchmarkCase> cases,
                                    const Retriever &retriever,
                                    RetrievalMode mode, std::size_t top_n,
                                    std::span<const int> ks = kDefaultTopK);

}  // namespace stratengine
