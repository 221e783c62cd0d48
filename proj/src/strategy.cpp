#include "stratengine/strategy.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace stratengine {

RuleLibrary::RuleLibrary(std::vector<StrategyRule> rules)
    : rules_(std::move(rules)) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    index_.emplace(rules_[i].rule_id, i);  // first occurrence wins
  }
  hash_ = compute_hash();
}

std::string RuleLibrary::compute_hash() const {
  ContentHasher h;
  h.field("library-v1");
  for (const auto &r : rules_) {
    h.field(r.rule_id).field(r.description).field(r.expression());
  }
  return h.hex();
}

std::optional<std::size_t> RuleLibrary::index_of(
    const std::string &rule_id) const {
  auto it = index_.find(rule_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

RuleLibrary RuleLibrary::load(const std::string &dir,
                              const Vocabularies *vocab) {
  namespace fs = std::filesystem;
  fs::path root(dir);
  std::ifstream manifest(root / "manifest.txt");
  if (!manifest) {
    throw Error("rule library '" + dir + "' has no manifest.txt");
  }
  std::vector<StrategyRule> rules;
  std::string line;
  while (std::getline(manifest, line)) {
    auto name = trim(line);
    if (name.empty() || name.front() == '#') continue;
    fs::path file = root / std::string(name);
    std::ifstream in(file);
    if (!in) throw Error("cannot open rule file '" + file.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      rules.push_back(parse_rule(buf.str(), vocab));
    } catch (const Error &e) {
      throw Error(file.string() + ": " + e.what());
    }
  }
  return RuleLibrary(std::move(rules));
}

// --- evaluation ---

RouteView::RouteView(const RouteTree &route, const AnnotationStore &store)
    : route_(route), store_(store), topology_(stratengine::topology(route)) {
  auto walk = [&](auto &&self, const RouteNode &node, int depth) -> void {
    if (node.is_reaction()) {
      sites_.push_back(
          {&node, depth,
           reaction_key(forward_reaction(node.reaction_smiles,
                                         route.direction))});
    } else {
      molecules_.push_back(&node);
      if (node.is_leaf() && &node != &route.root) leaves_.push_back(&node);
    }
    int next = node.is_molecule() ? depth + 1 : depth;
    for (const auto &c : node.children) self(self, c, next);
  };
  walk(walk, route.root, 0);
}

namespace {

class Evaluator {
 public:
  explicit Evaluator(const RouteView &view) : view_(view) {}

  bool at_site(const RuleExpr &e, const RouteView::Site &site) const {
    const auto &store = view_.store();
    auto dir = view_.route().direction;
    switch (e.op) {
      case RuleOp::reaction:
        return store.check_reaction_key(e.label, site.key);
      case RuleOp::fg_formed:
        return store.fg_event(e.label, *site.node, dir).kind ==
               EventKind::formed;
      case RuleOp::fg_consumed:
        return store.fg_event(e.label, *site.node, dir).kind ==
               EventKind::consumed;
      case RuleOp::fg_preserved:
        return store.fg_event(e.label, *site.node, dir).kind ==
               EventKind::preserved;
      case RuleOp::ring_formed:
        return store.ring_event(e.label, *site.node, dir).kind ==
               EventKind::formed;
      case RuleOp::ring_consumed:
        return store.ring_event(e.label, *site.node, dir).kind ==
               EventKind::consumed;
      case RuleOp::ring_preserved:
        return store.ring_event(e.label, *site.node, dir).kind ==
               EventKind::preserved;
      case RuleOp::all:
        for (const auto &a : e.args) {
          if (!at_site(*a, site)) return false;
        }
        return true;
      case RuleOp::any:
        for (const auto &a : e.args) {
          if (at_site(*a, site)) return true;
        }
        return false;
      case RuleOp::negate:
        return !at_site(*e.args[0], site);
      default:
        throw Error("route-level predicate evaluated at a reaction");
    }
  }

  bool route_level(const RuleExpr &e) const {
    const auto &store = view_.store();
    switch (e.op) {
      case RuleOp::reaction:
      case RuleOp::fg_formed:
      case RuleOp::fg_consumed:
      case RuleOp::fg_preserved:
      case RuleOp::ring_formed:
      case RuleOp::ring_consumed:
      case RuleOp::ring_preserved:
        for (const auto &s : view_.sites()) {
          if (at_site(e, s)) return true;
        }
        return false;
      case RuleOp::ring_preserved_from_leaf:
        return store.preserved_from_leaf(e.label, view_.route());
      case RuleOp::mol_has_fg:
      case RuleOp::mol_has_ring:
        return molecule_check(e);
      case RuleOp::convergent:
        return view_.topology().is_convergent;
      case RuleOp::linear:
        return view_.topology().step_count > 0 &&
               !view_.topology().is_convergent;
      case RuleOp::before: {
        auto p = min_depth(*e.args[0]);
        auto q = min_depth(*e.args[1]);
        return p && q && *p > *q;
      }
      case RuleOp::before_any: {
        auto p = max_depth(*e.args[0]);
        auto q = min_depth(*e.args[1]);
        return p && q && *p > *q;
      }
      case RuleOp::within_depth:
        for (const auto &s : view_.sites()) {
          if (s.depth <= e.number && at_site(*e.args[0], s)) return true;
        }
        return false;
      case RuleOp::at_final_step:
        for (const auto &s : view_.sites()) {
          if (s.depth == 1 && at_site(*e.args[0], s)) return true;
        }
        return false;
      case RuleOp::compare:
        return compare(e);
      case RuleOp::all:
        for (const auto &a : e.args) {
          if (!route_level(*a)) return false;
        }
        return true;
      case RuleOp::any:
        for (const auto &a : e.args) {
          if (route_level(*a)) return true;
        }
        return false;
      case RuleOp::negate:
        return !route_level(*e.args[0]);
      default:
        throw Error("numeric term evaluated as a predicate");
    }
  }

 private:
  bool molecule_check(const RuleExpr &e) const {
    const auto &store = view_.store();
    auto has = [&](const RouteNode *m) {
      return e.op == RuleOp::mol_has_fg ? store.check_fg(e.label, m->smiles)
                                        : store.check_ring(e.label, m->smiles);
    };
    switch (e.site) {
      case MoleculeSite::root:
        return has(&view_.route().root);
      case MoleculeSite::leaf:
        return std::any_of(view_.leaves().begin(), view_.leaves().end(), has);
      case MoleculeSite::any:
        return std::any_of(view_.molecules().begin(), view_.molecules().end(),
                           has);
    }
    return false;
  }

  std::optional<int> min_depth(const RuleExpr &p) const {
    std::optional<int> best;
    for (const auto &s : view_.sites()) {
      if ((!best || s.depth < *best) && at_site(p, s)) best = s.depth;
    }
    return best;
  }

  std::optional<int> max_depth(const RuleExpr &p) const {
    std::optional<int> best;
    for (const auto &s : view_.sites()) {
      if ((!best || s.depth > *best) && at_site(p, s)) best = s.depth;
    }
    return best;
  }

  std::optional<int> numeric(const RuleExpr &e) const {
    switch (e.op) {
      case RuleOp::literal:
        return e.number;
      case RuleOp::count: {
        int n = 0;
        for (const auto &s : view_.sites()) n += at_site(*e.args[0], s) ? 1 : 0;
        return n;
      }
      case RuleOp::depth_of:
        return min_depth(*e.args[0]);
      case RuleOp::max_depth:
        return view_.topology().max_depth;
      case RuleOp::steps:
        return view_.topology().step_count;
      default:
        throw Error("predicate used as a numeric term");
    }
  }

  bool compare(const RuleExpr &e) const {
    auto lhs = numeric(*e.args[0]);
    auto rhs = numeric(*e.args[1]);
    if (!lhs || !rhs) return false;
    switch (e.comparison) {
      case Comparison::lt: return *lhs < *rhs;
      case Comparison::le: return *lhs <= *rhs;
      case Comparison::gt: return *lhs > *rhs;
      case Comparison::ge: return *lhs >= *rhs;
      case Comparison::eq: return *lhs == *rhs;
      case Comparison::ne: return *lhs != *rhs;
    }
    return false;
  }

  const RouteView &view_;
};

}  // namespace

bool evaluate(const StrategyRule &rule, const RouteView &view) {
  if (!rule.ast) throw Error("rule '" + rule.rule_id + "' has no expression");
  return Evaluator(view).route_level(*rule.ast);
}

bool evaluate(const StrategyRule &rule, const RouteTree &route,
              const AnnotationStore &store) {
  RouteView view(route, store);
  return evaluate(rule, view);
}

void EvalDiagnostics::merge(const EvalDiagnostics &other) {
  failures.insert(failures.end(), other.failures.begin(),
                  other.failures.end());
  missing_annotations += other.missing_annotations;
}

namespace {

StrategyFingerprint fingerprint_route(const RuleLibrary &library,
                                      const RouteTree &route,
                                      const AnnotationStore &store,
                                      std::vector<RuleFailure> &failures) {
  StrategyFingerprint fp{route.route_id, BitVector(library.size())};
  RouteView view(route, store);
  for (std::size_t i = 0; i < library.size(); ++i) {
    try {
      if (evaluate(library[i], view)) fp.bits.set(i);
    } catch (const Error &e) {
      failures.push_back({library[i].rule_id, route.route_id, e.what()});
    }
  }
  return fp;
}

}  // namespace

StrategyFingerprint evaluate_library(const RuleLibrary &library,
                                     const RouteTree &route,
                                     const AnnotationStore &store,
                                     EvalDiagnostics *diagnostics) {
  auto before = store.missing_annotations();
  std::vector<RuleFailure> failures;
  auto fp = fingerprint_route(library, route, store, failures);
  if (diagnostics) {
    diagnostics->failures.insert(diagnostics->failures.end(),
                                 failures.begin(), failures.end());
    diagnostics->missing_annotations += store.missing_annotations() - before;
  }
  return fp;
}

std::vector<StrategyFingerprint> evaluate_corpus(
    const RuleLibrary &library, std::span<const RouteTree> routes,
    const AnnotationStore &store, EvalDiagnostics *diagnostics) {
  auto before = store.missing_annotations();
  std::vector<StrategyFingerprint> fps(routes.size());
  std::vector<std::vector<RuleFailure>> failures(routes.size());
  parallel_for(routes.size(), [&](std::size_t i) {
    fps[i] = fingerprint_route(library, routes[i], store, failures[i]);
  });
  if (diagnostics) {
    for (auto &f : failures) {
      diagnostics->failures.insert(diagnostics->failures.end(), f.begin(),
                                   f.end());
    }
    diagnostics->missing_annotations += store.missing_annotations() - before;
  }
  return fps;
}

LibraryReport validate_library(const RuleLibrary &library,
                               const Vocabularies &vocab) {
  LibraryReport report;
  std::set<std::string> seen;
  std::set<std::string> reported;
  for (const auto &rule : library.rules()) {
    if (!seen.insert(rule.rule_id).second &&
        reported.insert(rule.rule_id).second) {
      report.duplicate_ids.push_back(rule.rule_id);
    }
    for (auto kind : {LabelKind::reaction, LabelKind::fg, LabelKind::ring}) {
      for (const auto &label : rule.categorical_meta.of(kind)) {
        if (!vocab.contains(kind, label)) {
          report.unknown_labels.push_back({rule.rule_id, kind, label});
        }
      }
    }
    if (rule.categorical_meta.empty()) {
      report.purely_topological.push_back(rule.rule_id);
    }
  }
  return report;
}

std::vector<double> pass_rates(const RuleLibrary &library,
                               std::span<const StrategyFingerprint> fps) {
  std::vector<double> rates(library.size(), 0.0);
  if (fps.empty()) return rates;
  for (std::size_t i = 0; i < library.size(); ++i) {
    std::size_t passing = 0;
    for (const auto &fp : fps) {
      if (fp.bits.size() != library.size()) {
        throw Error("fingerprint length " + std::to_string(fp.bits.size()) +
                    " does not match library size " +
                    std::to_string(library.size()));
      }
      passing += fp.bits.test(i) ? 1 : 0;
    }
    rates[i] = static_cast<double>(passing) / static_cast<double>(fps.size());
  }
  return rates;
}

RuleLibrary prevalence_filter(const RuleLibrary &library,
                              std::span<const StrategyFingerprint> fps,
                              double threshold) {
  auto rates = pass_rates(library, fps);
  std::vector<StrategyRule> kept;
  for (std::size_t i = 0; i < library.size(); ++i) {
    if (rates[i] <= threshold) kept.push_back(library[i]);
  }
  return RuleLibrary(std::move(kept));
}

}  // namespace stratengine
