#include <catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>

#include "fixture_world.hpp"
#include "stratengine/rule.hpp"
#include "stratengine/strategy.hpp"

using namespace stratengine;

namespace {

const std::string kAzideSequence =
    "all(reaction(\"Amide Formation\"), reaction(\"Azide to amine reduction (Staudinger)\"), "
    "reaction(\"Azide Formation from Halogen/Alcohol\"), "
    "reaction(\"Alcohol Activation (e.g., Sulfonate)\"))";
const std::string kReductionFirst =
    "before(reaction(\"Reduction of ester to primary alcohol\"), "
    "reaction(\"Oxidation of Alcohols to Aldehydes/Ketones\"))";

struct Core {
  fixtures::World world = fixtures::core_world();
  AnnotationStore store = world.store();
  const Vocabularies &vocab = store.vocabularies();

  const RouteTree &route(const std::string &id) const {
    for (const auto &r : world.routes())
      if (r.route_id == id) return r;
    FAIL("no route " << id);
    throw;
  }
  bool eval(const std::string &expr, const std::string &id) const {
    return evaluate(make_rule("t", "", expr, &vocab), route(id), store);
  }
};

}  // namespace

TEST_CASE("parser builds the expected trees") {
  auto store = fixtures::core_world().store();
  const auto &vocab = store.vocabularies();
  auto a = make_rule("azide_sequence", "d", kAzideSequence, &vocab);
  REQUIRE(a.ast->op == RuleOp::all);
  REQUIRE(a.ast->args.size() == 4);
  CHECK(a.ast->args[1]->op == RuleOp::reaction);
  CHECK(a.ast->args[1]->label == "Azide to amine reduction (Staudinger)");
  CHECK(a.categorical_meta.reactions.size() == 4);
  CHECK(a.categorical_meta.fgs.empty());

  auto b = make_rule("reduction_first", "d", kReductionFirst, &vocab);
  CHECK(b.ast->op == RuleOp::before);
  CHECK(b.ast->args[0]->label == "Reduction of ester to primary alcohol");

  auto c = make_rule("c", "d", "count(fg_formed(\"Amide\")) >= 2", &vocab);
  CHECK(c.ast->op == RuleOp::compare);
  CHECK(c.ast->comparison == Comparison::ge);
  CHECK(c.ast->args[0]->op == RuleOp::count);
  CHECK(c.ast->args[1]->number == 2);
  CHECK(c.categorical_meta.fgs == std::set<std::string>{"Amide"});
}

TEST_CASE("printing and reparsing is stable") {
  const std::vector<std::string> exprs = {
      kAzideSequence, kReductionFirst, "not(convergent())", "any()", "all()",
      "within_depth(any(reaction(\"Suzuki Coupling\"), ring_formed(\"pyridine\")), 2)",
      "mol_has_fg(\"Ester\", leaf)", "depth_of(reaction(\"Suzuki Coupling\")) < max_depth()",
      "steps() != 3", "before_any(fg_consumed(\"Azide\"), fg_formed(\"Amide\"))"};
  for (const auto &e : exprs) {
    auto once = to_string(parse_expression(e));
    CHECK(to_string(parse_expression(once)) == once);
  }
}

TEST_CASE("syntax errors carry a position") {
  try {
    parse_expression("not(unknown_pred(\"x\"))");
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(std::string(e.what()).find("unknown predicate 'unknown_pred'") != std::string::npos);
    CHECK(e.line() == 1);
    CHECK(e.column() == 5);
  }
  CHECK_THROWS_AS(parse_expression("all(convergent()"), ParseError);
  CHECK_THROWS_AS(parse_expression("reaction(\"unterminated)"), ParseError);
  CHECK_THROWS_AS(parse_expression("convergent() convergent()"), ParseError);
  CHECK_THROWS_WITH(parse_expression("all(\n  convergent(),\n  reaction(3))"),
                    Catch::Matchers::StartsWith("line 3"));
}

TEST_CASE("depth-aware forms only wrap reaction-level predicates") {
  CHECK_THROWS_AS(parse_expression("before(convergent(), reaction(\"x\"))"), ParseError);
  CHECK_THROWS_AS(parse_expression("within_depth(mol_has_fg(\"x\", root), 2)"), ParseError);
  CHECK_THROWS_AS(parse_expression("at_final_step(ring_preserved_from_leaf(\"x\"))"), ParseError);
  CHECK_NOTHROW(parse_expression("at_final_step(all(reaction(\"x\"), not(fg_formed(\"y\"))))"));
}

TEST_CASE("labels are checked against the vocabularies") {
  auto store = fixtures::core_world().store();
  CHECK_THROWS_WITH(parse_expression("reaction(\"Grignard\")", &store.vocabularies()),
                    "line 1, column 10: unknown reaction label 'Grignard'");
  CHECK_THROWS_WITH(parse_expression("mol_has_ring(\"furan\", any)", &store.vocabularies()),
                    "line 1, column 14: unknown ring label 'furan'");
  CHECK_NOTHROW(parse_expression("reaction(\"Grignard\")"));
}

TEST_CASE("rule files have front matter") {
  auto r = parse_rule("id: late_suzuki\ndescription: Suzuki at the end\n---\n"
                      "# trailing comment\nat_final_step(reaction(\"Suzuki Coupling\"))\n");
  CHECK(r.rule_id == "late_suzuki");
  CHECK(r.description == "Suzuki at the end");
  CHECK(r.expression() == "at_final_step(reaction(\"Suzuki Coupling\"))");
  CHECK(parse_rule(format_rule(r)).expression() == r.expression());
  CHECK_THROWS(parse_rule("description: no id\n---\nconvergent()\n"));
  CHECK_THROWS(parse_rule("id: bad id!\n---\nconvergent()\n"));
  CHECK_THROWS(parse_rule("id: x\nconvergent()\n"));
  // errors inside the expression report file lines
  CHECK_THROWS_WITH(parse_rule("id: x\ndescription: y\n---\nall(\n  nope())\n"),
                    Catch::Matchers::StartsWith("line 5"));
}

TEST_CASE("azide sequence conjunction needs all four steps") {
  Core core;
  CHECK(core.eval(kAzideSequence, "azide_route_full"));
  for (auto id : {"azide_route_without_activation", "azide_route_without_azide_formation",
                  "azide_route_without_staudinger", "azide_route_without_amide"}) {
    INFO(id);
    CHECK_FALSE(core.eval(kAzideSequence, id));
  }
}

TEST_CASE("reduction before oxidation uses depth") {
  Core core;
  CHECK(core.eval(kReductionFirst, "redox_route_full"));
  CHECK_FALSE(core.eval(kReductionFirst, "redox_route_swapped"));
  CHECK_FALSE(core.eval(kReductionFirst, "redox_route_without_reduction"));
  CHECK_FALSE(core.eval(kReductionFirst, "redox_route_without_oxidation"));
  // reversed arguments hold on the swapped route
  const std::string reversed =
      "before(reaction(\"Oxidation of Alcohols to Aldehydes/Ketones\"), "
      "reaction(\"Reduction of ester to primary alcohol\"))";
  CHECK(core.eval(reversed, "redox_route_swapped"));
  CHECK(core.eval("depth_of(reaction(\"Reduction of ester to primary alcohol\")) == 3", "redox_route_full"));
  CHECK(core.eval("at_final_step(reaction(\"Oxidation of Alcohols to Aldehydes/Ketones\"))", "redox_route_full"));
}

TEST_CASE("before is never vacuous") {
  Core core;
  for (const auto &r : core.world.routes()) {
    INFO(r.route_id);
    CHECK_FALSE(core.eval("before(reaction(\"Heck Coupling\"), reaction(\"Amide Formation\"))", r.route_id));
    CHECK_FALSE(core.eval("before(reaction(\"Amide Formation\"), reaction(\"Heck Coupling\"))", r.route_id));
  }
}

TEST_CASE("before uses earliest-found depth; before_any is existential") {
  fixtures::World w;
  w.declare_standard();
  // forward: Suzuki, Amide, Suzuki, Amide  -> depths 4,3,2,1
  auto r = w.add(w.chain("zig", "A",
                         {{"B", {"x"}, {"Suzuki Coupling"}},
                          {"C", {"x"}, {"Amide Formation"}},
                          {"D", {"x"}, {"Suzuki Coupling"}},
                          {"E", {"x"}, {"Amide Formation"}}}));
  auto store = w.store();
  auto eval = [&](const std::string &e) {
    return evaluate(make_rule("t", "", e, &store.vocabularies()), r, store);
  };
  // min depth Suzuki 2 > min depth Amide 1
  CHECK(eval("before(reaction(\"Suzuki Coupling\"), reaction(\"Amide Formation\"))"));
  // min depth Amide 1 < min depth Suzuki 2
  CHECK_FALSE(eval("before(reaction(\"Amide Formation\"), reaction(\"Suzuki Coupling\"))"));
  // some Amide (depth 3) is earlier than the latest Suzuki (depth 2)
  CHECK(eval("before_any(reaction(\"Amide Formation\"), reaction(\"Suzuki Coupling\"))"));
  CHECK(eval("count(reaction(\"Suzuki Coupling\")) == 2"));
  CHECK(eval("within_depth(reaction(\"Suzuki Coupling\"), 2)"));
  CHECK_FALSE(eval("within_depth(reaction(\"Suzuki Coupling\"), 1)"));
  CHECK(eval("max_depth() == 4"));
  CHECK(eval("steps() > 3"));
}

TEST_CASE("topology predicates") {
  Core core;
  CHECK(core.eval("convergent()", "convergent_amide"));
  CHECK_FALSE(core.eval("convergent()", "azide_route_full"));
  CHECK(core.eval("linear()", "azide_route_full"));
  CHECK_FALSE(core.eval("linear()", "convergent_amide"));
}

TEST_CASE("molecule predicates inspect the chosen site") {
  Core core;
  CHECK(core.eval("mol_has_ring(\"pyrazole\", root)", "linker_ground_truth"));
  CHECK(core.eval("mol_has_ring(\"pyrazole\", leaf)", "linker_ground_truth"));
  CHECK_FALSE(core.eval("mol_has_ring(\"pyrazole\", leaf)", "linker_ring_formed"));
  CHECK(core.eval("mol_has_ring(\"pyrazole\", root)", "linker_ring_formed"));
  CHECK(core.eval("ring_formed(\"pyrazole\")", "linker_ring_formed"));
  CHECK(core.eval("ring_preserved_from_leaf(\"pyrazole\")", "linker_ground_truth"));
  CHECK_FALSE(core.eval("ring_preserved_from_leaf(\"pyrazole\")", "linker_ring_formed"));
}

TEST_CASE("library fingerprint for a linear route ending in Suzuki is 101") {
  Core core;
  std::vector<StrategyRule> rules = {
      make_rule("lin", "", "linear()", &core.vocab),
      make_rule("conv", "", "convergent()", &core.vocab),
      make_rule("suz", "", "at_final_step(reaction(\"Suzuki Coupling\"))", &core.vocab)};
  RuleLibrary lib(rules);
  auto fp = evaluate_library(lib, core.route("suzuki_late_stage"), core.store);
  CHECK(fp.bits.to_bit_string() == "101");
  for (int i = 0; i < 100; ++i) {
    CHECK(evaluate_library(lib, core.route("suzuki_late_stage"), core.store) == fp);
  }
  CHECK(evaluate_library(RuleLibrary{}, core.route("suzuki_late_stage"), core.store).bits.size() == 0);
}

TEST_CASE("rule errors become zero bits with diagnostics") {
  Core core;
  // parsed without vocabulary, so the unknown label surfaces at evaluation
  std::vector<StrategyRule> rules = {make_rule("ok", "", "linear()"),
                                     make_rule("bad", "", "reaction(\"Grignard\")")};
  RuleLibrary lib(rules);
  EvalDiagnostics diag;
  auto fp = evaluate_library(lib, core.route("azide_route_full"), core.store, &diag);
  CHECK(fp.bits.to_bit_string() == "10");
  REQUIRE(diag.failures.size() == 1);
  CHECK(diag.failures[0].rule_id == "bad");
  CHECK(diag.failures[0].route_id == "azide_route_full");
}

TEST_CASE("combinators follow boolean algebra on fixture routes") {
  Core core;
  std::vector<std::string> atoms;
  for (const auto &r : core.world.rules()) atoms.push_back(r.expression());
  for (auto extra : {"reaction(\"Suzuki Coupling\")", "ring_formed(\"pyrazole\")",
                     "within_depth(reaction(\"Amide Formation\"), 1)", "steps() >= 3"}) {
    atoms.push_back(extra);
  }
  std::mt19937 rng(2024);
  auto pick = [&] { return atoms[rng() % atoms.size()]; };
  for (int trial = 0; trial < 300; ++trial) {
    auto p = pick(), q = pick();
    for (const auto &r : core.world.routes()) {
      bool vp = core.eval(p, r.route_id), vq = core.eval(q, r.route_id);
      CHECK(core.eval("all(" + p + ", " + q + ")", r.route_id) == (vp && vq));
      CHECK(core.eval("any(" + p + ", " + q + ")", r.route_id) == (vp || vq));
      CHECK(core.eval("not(" + p + ")", r.route_id) == !vp);
    }
  }
}

TEST_CASE("canonicalization does not change results") {
  Core core;
  auto lib = core.world.library();
  std::mt19937 rng(5);
  for (const auto &r : core.world.routes()) {
    auto base = evaluate_library(lib, r, core.store);
    auto shuffled = r;
    auto shuffle = [&](auto &&self, RouteNode &n) -> void {
      std::shuffle(n.children.begin(), n.children.end(), rng);
      for (auto &c : n.children) self(self, c);
    };
    shuffle(shuffle, shuffled.root);
    CHECK(evaluate_library(lib, canonicalize(shuffled), core.store).bits == base.bits);
  }
}

TEST_CASE("library hash guards bit positions") {
  Core core;
  auto rules = core.world.rules();
  RuleLibrary a(rules);
  std::reverse(rules.begin(), rules.end());
  RuleLibrary b(rules);
  CHECK(a.content_hash() != b.content_hash());
  CHECK(RuleLibrary(core.world.rules()).content_hash() == a.content_hash());
  CHECK(a.index_of("late_stage_suzuki") == 5);
  CHECK_FALSE(a.index_of("nope"));
}

TEST_CASE("library loads from a directory in manifest order") {
  Core core;
  auto lib = RuleLibrary::load(std::string(STRATENGINE_FIXTURE_DIR) + "/core/library", &core.vocab);
  REQUIRE(lib.size() == core.world.rules().size());
  CHECK(lib.content_hash() == core.world.library().content_hash());
  CHECK(lib[0].rule_id == "azide_amide_sequence");
  CHECK_THROWS_WITH(RuleLibrary::load("/nonexistent"), Catch::Matchers::ContainsSubstring("manifest"));
}

TEST_CASE("validate_library reports problems") {
  Core core;
  std::vector<StrategyRule> rules = {make_rule("a", "", "reaction(\"Suzuki Coupling\")"),
                                     make_rule("a", "", "reaction(\"Grignard\")"),
                                     make_rule("topo", "", "convergent()")};
  auto report = validate_library(RuleLibrary(rules), core.vocab);
  REQUIRE(report.unknown_labels.size() == 1);
  CHECK(report.unknown_labels[0].label == "Grignard");
  CHECK(report.duplicate_ids == std::vector<std::string>{"a"});
  CHECK(report.purely_topological == std::vector<std::string>{"topo"});
  std::vector<StrategyRule> clean = {make_rule("x", "", "reaction(\"Suzuki Coupling\")")};
  CHECK(validate_library(RuleLibrary(clean), core.vocab).clean());
}

TEST_CASE("prevalence filter drops rules above the threshold") {
  std::vector<StrategyRule> rules = {make_rule("common", "", "linear()"),
                                     make_rule("rare", "", "convergent()")};
  RuleLibrary lib(rules);
  std::vector<StrategyFingerprint> fps;
  for (int i = 0; i < 100; ++i) {
    BitVector bits(2);
    bits.set(0, i < 90);
    bits.set(1, i < 10);
    fps.push_back({"r" + std::to_string(i), bits});
  }
  auto rates = pass_rates(lib, fps);
  CHECK(rates[0] == Catch::Approx(0.9));
  CHECK(rates[1] == Catch::Approx(0.1));
  auto kept = prevalence_filter(lib, fps, 0.40);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].rule_id == "rare");
  CHECK(prevalence_filter(lib, fps, 1.0).size() == 2);
}

TEST_CASE("bit vectors round-trip through text") {
  BitVector b(11);
  for (int i : {0, 3, 4, 10}) b.set(static_cast<std::size_t>(i));
  CHECK(b.to_bit_string() == "10011000001");
  CHECK(b.count() == 4);
  CHECK(BitVector::from_hex(b.to_hex(), 11) == b);
  CHECK(BitVector::from_bit_string(b.to_bit_string()) == b);
  CHECK_THROWS(BitVector::from_hex("zz", 8));
}
