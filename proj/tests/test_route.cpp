#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "fixture_world.hpp"
#include "stratengine/route.hpp"

using namespace stratengine;

namespace {

const char *kRetroRoute = R"({
  "route_id": "r1", "year": 2015, "source": "US2015000001A1", "direction": "retro",
  "tree": {"type": "mol", "smiles": "CC(=O)NCc1ccccc1", "children": [
    {"type": "reaction", "metadata": {"rsmi": "CC(=O)NCc1ccccc1>>NCc1ccccc1.CC(=O)Cl"},
     "children": [
      {"type": "mol", "smiles": "NCc1ccccc1", "children": [
        {"type": "reaction", "metadata": {"rsmi": "NCc1ccccc1>>N#Cc1ccccc1.[H][H]",
                                          "mapped_reaction_smiles": "[NH2:1]>>[N:1]"},
         "children": [{"type": "mol", "smiles": "N#Cc1ccccc1"},
                      {"type": "mol", "smiles": "[H][H]"}]}]},
      {"type": "molecule", "smiles": "CC(=O)Cl"}]}]}
})";

RouteTree three_step() {
  fixtures::World w;
  w.declare_standard();
  return w.chain("lin", "A", {{"B", {"x"}, {}}, {"C", {"y"}, {}}, {"D", {"z"}, {}}});
}

const RouteNode &reaction_producing(const RouteNode &node, const std::string &smiles) {
  const RouteNode *found = nullptr;
  for_each_node(node, [&](const RouteNode &n) {
    if (n.is_molecule() && n.smiles == smiles && !n.children.empty()) found = &n.children[0];
  });
  REQUIRE(found);
  return *found;
}

}  // namespace

TEST_CASE("route records parse with metadata and generated ids") {
  auto r = parse_route(kRetroRoute);
  CHECK(r.route_id == "r1");
  CHECK(r.year == 2015);
  CHECK(r.source == "US2015000001A1");
  CHECK(r.direction == Direction::retro);
  CHECK(r.root.node_id == "n0");
  CHECK(r.root.children[0].node_id == "n1");
  CHECK(r.root.children[0].children[1].smiles == "CC(=O)Cl");
  const auto &inner = r.root.children[0].children[0].children[0];
  REQUIRE(inner.mapped_reaction_smiles);
  CHECK(*inner.mapped_reaction_smiles == "[NH2:1]>>[N:1]");
  CHECK(node_count(r.root) == 7);
}

TEST_CASE("bare node objects parse as routes") {
  auto r = parse_route(R"({"type":"mol","smiles":"C"})");
  CHECK(r.root.smiles == "C");
  CHECK(r.root.children.empty());
  CHECK(topology(r).step_count == 0);
}

TEST_CASE("schema violations name the offending path") {
  SECTION("molecule under molecule") {
    const char *bad = R"({"type":"mol","smiles":"C","children":[
      {"type":"reaction","metadata":{"rsmi":"A>>C"},"children":[
        {"type":"mol","smiles":"A","children":[{"type":"mol","smiles":"B"}]}]}]})";
    try {
      parse_route(bad);
      FAIL("expected an error");
    } catch (const RouteError &e) {
      CHECK(e.path() == "root/0/0/0");
      CHECK(std::string(e.what()).find("type alternation violated") != std::string::npos);
    }
  }
  SECTION("reaction directly under reaction") {
    const char *bad = R"({"type":"mol","smiles":"C","children":[
      {"type":"reaction","metadata":{"rsmi":"A>>C"},"children":[
        {"type":"reaction","metadata":{"rsmi":"A>>C"},"children":[{"type":"mol","smiles":"A"}]}]}]})";
    CHECK_THROWS_WITH(parse_route(bad), Catch::Matchers::ContainsSubstring("root/0/0"));
  }
  SECTION("reaction leaf") {
    CHECK_THROWS_WITH(parse_route(R"({"type":"mol","smiles":"C","children":[
      {"type":"reaction","metadata":{"rsmi":"A>>C"}}]})"),
                      Catch::Matchers::ContainsSubstring("reaction node without children"));
  }
  SECTION("missing fields") {
    CHECK_THROWS_WITH(parse_route(R"({"type":"mol"})"),
                      Catch::Matchers::ContainsSubstring("missing smiles"));
    CHECK_THROWS_WITH(parse_route(R"({"type":"mol","smiles":"C","children":[
      {"type":"reaction","children":[{"type":"mol","smiles":"A"}]}]})"),
                      Catch::Matchers::ContainsSubstring("missing reaction_smiles"));
  }
  SECTION("root must be a molecule") {
    CHECK_THROWS_AS(parse_route(R"({"type":"reaction","metadata":{"rsmi":"A>>C"},
      "children":[{"type":"mol","smiles":"A"}]})"), RouteError);
  }
  SECTION("malformed JSON") {
    CHECK_THROWS_WITH(parse_route("{\"type\": "), Catch::Matchers::StartsWith("malformed JSON"));
  }
}

TEST_CASE("depth: final step is 1, first step is max_depth") {
  auto r = three_step();
  fixtures::assign_preorder_ids(r.root);
  auto d = depth_map(r);
  CHECK(d.max_depth == 3);
  CHECK(d.at(r.root.node_id) == 0);
  CHECK(d.at(reaction_producing(r.root, "D").node_id) == 1);
  CHECK(d.at(reaction_producing(r.root, "C").node_id) == 2);
  CHECK(d.at(reaction_producing(r.root, "B").node_id) == 3);
  auto t = topology(r);
  CHECK(t.step_count == 3);
  CHECK(t.leaf_count == 4);
  CHECK_FALSE(t.is_convergent);
  CHECK(t.longest_linear_sequence == 3);
}

TEST_CASE("convergence needs two non-leaf reactants at one step") {
  fixtures::World w;
  w.declare_standard();
  RouteTree conv;
  conv.route_id = "c";
  conv.root = w.mol("T", {w.mol("P", {w.mol("a"), w.mol("b")}), w.mol("Q", {w.mol("c")})});
  fixtures::assign_preorder_ids(conv.root);
  CHECK(topology(conv).is_convergent);
  CHECK(topology(conv).max_depth == 2);

  RouteTree lin;
  lin.root = w.mol("T", {w.mol("P", {w.mol("a"), w.mol("b")}), w.mol("q")});
  fixtures::assign_preorder_ids(lin.root);
  CHECK_FALSE(topology(lin).is_convergent);
}

TEST_CASE("reaction strings reverse and split") {
  CHECK(reverse_reaction("P>cat>A.B") == "A.B>cat>P");
  CHECK(forward_reaction("P>>A.B", Direction::retro) == "A.B>>P");
  CHECK(forward_reaction("A.B>>P", Direction::forward) == "A.B>>P");
  auto parts = split_reaction("A.B>C>P");
  CHECK(parts.reactants == std::vector<std::string>{"A", "B"});
  CHECK(parts.agents == std::vector<std::string>{"C"});
  CHECK(parts.products == std::vector<std::string>{"P"});
}

TEST_CASE("canonicalize normalizes direction and child order") {
  auto r = parse_route(kRetroRoute);
  auto c = canonicalize(r);
  CHECK(c.direction == Direction::forward);
  CHECK(c.root.children[0].reaction_smiles == "NCc1ccccc1.CC(=O)Cl>>CC(=O)NCc1ccccc1");
  // deepest subtree first
  CHECK(c.root.children[0].children[0].smiles == "NCc1ccccc1");
  CHECK(serialize_route(canonicalize(c)) == serialize_route(c));
  CHECK(topology(c) == topology(r));
}

TEST_CASE("canonical form is invariant under child permutations") {
  fixtures::World w;
  w.declare_standard();
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    RouteTree r;
    r.root = w.mol("T", {w.mol("P", {w.mol("a"), w.mol("b"), w.mol("c")}),
                         w.mol("Q", {w.mol("d", {w.mol("e")})}), w.mol("f")});
    fixtures::assign_preorder_ids(r.root);
    auto base = subtree_signature(canonicalize(r).root);
    auto shuffle = [&](auto &&self, RouteNode &n) -> void {
      std::shuffle(n.children.begin(), n.children.end(), rng);
      for (auto &c : n.children) self(self, c);
    };
    shuffle(shuffle, r.root);
    CHECK(subtree_signature(canonicalize(r).root) == base);
  }
}

TEST_CASE("serialization round-trips") {
  auto r = parse_route(kRetroRoute);
  auto again = parse_route(serialize_route(r));
  CHECK(serialize_route(again) == serialize_route(r));
  CHECK(again.route_id == r.route_id);
  CHECK(again.year == r.year);
}

TEST_CASE("corpus files round-trip with a stable hash") {
  auto w = fixtures::core_world();
  auto corpus = w.corpus();
  std::stringstream ss;
  write_corpus(ss, corpus);
  auto back = read_corpus(ss);
  REQUIRE(back.routes.size() == corpus.routes.size());
  CHECK(corpus_hash(back) == corpus_hash(corpus));
  std::stringstream again;
  write_corpus(again, back);
  std::stringstream first;
  write_corpus(first, corpus);
  CHECK(again.str() == first.str());
}

TEST_CASE("extract_routes follows producers depth-first") {
  std::vector<ReactionRecord> rx = {
      {"A.x>>B", 2001, "P1"},
      {"B.y>>C", 2002, "P2"},
      {"C.z>>D", 2003, "P3"},
      {"q>>B", 2004, "P4"},  // later alternative producer of B
      {"m.n>>K", 2005, "P5"},
  };
  auto roots = terminal_products(rx);
  CHECK(roots == std::vector<std::string>{"D", "K"});
  auto routes = extract_routes(rx, roots);
  REQUIRE(routes.size() == 2);
  const auto &d = routes[0].route;
  CHECK(d.route_id == "route_000000");
  CHECK(d.year == 2003);
  CHECK(d.source == "P3");
  CHECK(topology(d).step_count == 3);
  const auto &b = reaction_producing(d.root, "B");
  CHECK(b.reaction_smiles == "A.x>>B");
  CHECK(b.metadata["alternates"] == 1);
  CHECK(topology(routes[1].route).step_count == 1);
}

TEST_CASE("extraction stops at cycles") {
  std::vector<ReactionRecord> rx = {{"A>>B", 2000, "P"}, {"B>>A", 2000, "P"}, {"B.c>>T", 2000, "P"}};
  std::vector<std::string> roots = {"T"};
  auto routes = extract_routes(rx, roots);
  REQUIRE(routes.size() == 1);
  // T <- B <- A <- (B seen on path: leaf)
  CHECK(topology(routes[0].route).step_count == 3);
  validate_route(routes[0].route);
}

TEST_CASE("roots without producers are flagged") {
  std::vector<ReactionRecord> rx = {{"A>>B", 2000, "P"}};
  std::vector<std::string> roots = {"Z"};
  auto routes = extract_routes(rx, roots);
  CHECK_FALSE(routes[0].root_produced);
}

TEST_CASE("route count matches the number of terminal products") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<ReactionRecord> rx;
    const int n = 2 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) {
      int p = static_cast<int>(rng() % 12), a = static_cast<int>(rng() % 12);
      if (a == p) a = (a + 1) % 12;
      rx.push_back({"M" + std::to_string(a) + ".r>>M" + std::to_string(p), 2000 + i, "P"});
    }
    std::set<std::string> reactants, products;
    for (const auto &r : rx) {
      auto parts = split_reaction(r.reaction_smiles);
      reactants.insert(parts.reactants.begin(), parts.reactants.end());
      products.insert(parts.products.begin(), parts.products.end());
    }
    std::size_t expected = 0;
    for (const auto &p : products) expected += !reactants.count(p);
    auto roots = terminal_products(rx);
    CHECK(roots.size() == expected);
    for (const auto &r : extract_routes(rx, roots)) validate_route(r.route);
  }
}

TEST_CASE("reaction TSV parsing") {
  std::istringstream good("reaction_smiles\tyear\tpatent_id\nA>>B\t2001\tP1\nB>>C\t\tP2\n");
  auto rx = read_reaction_tsv(good);
  REQUIRE(rx.size() == 2);
  CHECK(rx[0].year == 2001);
  CHECK_FALSE(rx[1].year);
  std::istringstream bad("A>>B\t2001\tP1\nB>>C\t2002\n");
  CHECK_THROWS_WITH(read_reaction_tsv(bad), Catch::Matchers::ContainsSubstring("line 2"));
  std::istringstream empty("");
  CHECK(read_reaction_tsv(empty).empty());
}
