#pragma once

// Rule libraries and their evaluation over routes.

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stratengine/annotations.hpp"
#include "stratengine/fingerprint.hpp"
#include "stratengine/route.hpp"
#include "stratengine/rule.hpp"

namespace stratengine {

// Ordered rules; position i is fingerprint bit i.
class RuleLibrary {
 public:
  RuleLibrary() : hash_(compute_hash()) {}
  explicit RuleLibrary(std::vector<StrategyRule> rules);

  // Directory with manifest.txt listing rule files in bit order.
  static RuleLibrary load(const std::string &dir,
                          const Vocabularies *vocab = nullptr);

  const std::vector<StrategyRule> &rules() const { return rules_; }
  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  const StrategyRule &operator[](std::size_t i) const { return rules_[i]; }
  std::optional<std::size_t> index_of(const std::string &rule_id) const;
  const std::string &content_hash() const { return hash_; }

 private:
  std::string compute_hash() const;

  std::vector<StrategyRule> rules_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string hash_;
};

// Per-route evaluation view: reaction sites with depths and lookup keys.
class RouteView {
 public:
  struct Site {
    const RouteNode *node = nullptr;
    int depth = 0;
    std::string key;
  };

  RouteView(const RouteTree &route, const AnnotationStore &store);

  const RouteTree &route() const { return route_; }
  const AnnotationStore &store() const { return store_; }
  const std::vector<Site> &sites() const { return sites_; }
  const Topology &topology() const { return topology_; }
  const std::vector<const RouteNode *> &leaves() const { return leaves_; }
  const std::vector<const RouteNode *> &molecules() const {
    return molecules_;
  }

 private:
  const RouteTree &route_;
  const AnnotationStore &store_;
  std::vector<Site> sites_;
  std::vector<const RouteNode *> leaves_;
  std::vector<const RouteNode *> molecules_;
  Topology topology_;
};

bool evaluate(const StrategyRule &rule, const RouteView &view);
bool evaluate(const StrategyRule &rule, const RouteTree &route,
              const AnnotationStore &store);

struct RuleFailure {
  std::string rule_id;
  std::string route_id;
  std::string message;
};

struct EvalDiagnostics {
  std::vector<RuleFailure> failures;
  std::uint64_t missing_annotations = 0;

  void merge(const EvalDiagnostics &other);
};

// A rule that errors contributes a 0 bit and a failure record.
StrategyFingerprint evaluate_library(const RuleLibrary &library,
                                     const RouteTree &route,
                                     const AnnotationStore &store,
                                     EvalDiagnostics *diagnostics = nullptr);

std::vector<StrategyFingerprint> evaluate_corpus(
    const RuleLibrary &library, std::span<const RouteTree> routes,
    const AnnotationStore &store, EvalDiagnostics *diagnostics = nullptr);

struct LibraryReport {
  struct UnknownLabel {
    std::string rule_id;
    LabelKind kind;
    std::string label;
  };
  std::vector<UnknownLabel> unknown_labels;
  std::vector<std::string> duplicate_ids;
  std::vector<std::string> purely_topological;

  bool clean() const {
    return unknown_labels.empty() && duplicate_ids.empty() &&
           purely_topological.empty();
  }
};

LibraryReport validate_library(const RuleLibrary &library,
                               const Vocabularies &vocab);

// Fraction of fingerprints with bit i set, per rule.
std::vector<double> pass_rates(const RuleLibrary &library,
                               std::span<const StrategyFingerprint> fps);

// Drops rules whose pass rate exceeds threshold.
RuleLibrary prevalence_filter(const RuleLibrary &library,
                              std::span<const StrategyFingerprint> fps,
                              double threshold = 0.40);

}  // namespace stratengine
