#pragma once

// Declarative strategy rules: a small closed expression language over
// checker predicates, depth ordering and route topology.
//
//   all(reaction("Amide Formation"), not(convergent()))
//   before(reaction("Reduction of ester to primary alcohol"),
//          reaction("Oxidation of Alcohols to Aldehydes/Ketones"))
//   count(fg_formed("triazole")) >= 2
//
// Reaction-level predicates hold at a single reaction node. Used directly
// at route level they mean "holds at some reaction of the route". The
// depth-aware forms (before, within_depth, at_final_step, count, depth_of)
// take reaction-level arguments only.

#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stratengine/annotations.hpp"
#include "stratengine/common.hpp"

namespace stratengine {

enum class RuleOp {
  // reaction-level
  reaction,
  fg_formed,
  fg_consumed,
  fg_preserved,
  ring_formed,
  ring_consumed,
  ring_preserved,
  // route-level
  ring_preserved_from_leaf,
  mol_has_fg,
  mol_has_ring,
  convergent,
  linear,
  before,
  before_any,
  within_depth,
  at_final_step,
  compare,
  // context-polymorphic combinators
  all,
  any,
  negate,
  // numeric terms
  literal,
  count,
  depth_of,
  max_depth,
  steps,
};

// Which molecules mol_has_* inspects.
enum class MoleculeSite { root, leaf, any };

enum class Comparison { lt, le, gt, ge, eq, ne };

struct RuleExpr;
using RuleExprPtr = std::shared_ptr<const RuleExpr>;

struct RuleExpr {
  RuleOp op = RuleOp::all;
  std::string label;
  MoleculeSite site = MoleculeSite::any;
  int number = 0;  // literal value, or within_depth bound
  Comparison comparison = Comparison::eq;
  std::vector<RuleExprPtr> args;
  int line = 1;
  int column = 1;
};

class ParseError : public Error {
 public:
  ParseError(const std::string &message, int line, int column)
      : Error("line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Label sets mentioned by a rule, or required by a retrieval sub-query.
struct CategoricalLabels {
  std::set<std::string> reactions;
  std::set<std::string> fgs;
  std::set<std::string> rings;

  bool empty() const {
    return reactions.empty() && fgs.empty() && rings.empty();
  }
  bool superset_of(const CategoricalLabels &required) const;
  const std::set<std::string> &of(LabelKind kind) const;
  std::set<std::string> &of(LabelKind kind);
  bool operator==(const CategoricalLabels &) const = default;
};

// Parses one expression. With vocab set, every label must be declared.
// line_offset shifts reported line numbers (front matter in rule files).
RuleExprPtr parse_expression(std::string_view text,
                             const Vocabularies *vocab = nullptr,
                             int line_offset = 0);

std::string to_string(const RuleExprPtr &expr);

CategoricalLabels collect_labels(const RuleExprPtr &expr);

// True when expr can be evaluated at a single reaction node.
bool is_reaction_level(const RuleExpr &expr);

struct StrategyRule {
  std::string rule_id;
  std::string description;
  RuleExprPtr ast;
  CategoricalLabels categorical_meta;  // derived from ast, never edited

  std::string expression() const { return to_string(ast); }
};

// Rule file: "id:" and "description:" front matter, a "---" line, then
// one expression.
StrategyRule parse_rule(std::string_view text,
                        const Vocabularies *vocab = nullptr);

StrategyRule make_rule(std::string rule_id, std::string description,
                       std::string_view expression,
                       const Vocabularies *vocab = nullptr);

std::string format_rule(const StrategyRule &rule);

}  // namespace stratengine
