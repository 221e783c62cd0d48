#include <catch_amalgamated.hpp>

#include <random>

#include "fixture_world.hpp"
#include "oracles.hpp"
#include "random_cases.hpp"
#include "stratengine/tree_edit_distance.hpp"

using namespace stratengine;

namespace {

LabeledTree path_tree(std::initializer_list<const char *> labels) {
  LabeledTree t;
  int parent = -1;
  for (auto l : labels) parent = t.add(l, parent);
  return t;
}

}  // namespace

TEST_CASE("hand examples") {
  auto abc = path_tree({"a", "b", "c"});
  CHECK(tree_edit_distance(abc, abc) == 0.0);
  CHECK(tree_edit_distance(abc, path_tree({"a", "b"})) == 1.0);
  CHECK(tree_edit_distance(abc, path_tree({"a", "x", "c"})) == 1.0);
  CHECK(tree_edit_distance(abc, path_tree({"x", "y", "z"})) == 3.0);
  LabeledTree fan;
  fan.add("a");
  fan.add("b", 0);
  fan.add("c", 0);
  // chain a-b-c vs fan a(b,c): move c up = delete + insert
  CHECK(tree_edit_distance(abc, fan) == 2.0);
  CHECK(tree_edit_distance(LabeledTree{}, abc) == 3.0);
}

TEST_CASE("Zhang-Shasha equals brute-force enumeration") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = fixtures::random_labeled_tree(rng, 6), b = fixtures::random_labeled_tree(rng, 6);
    INFO("trial " << trial);
    CHECK(tree_edit_distance(a, b) == oracles::brute_force_ted(a, b));
  }
}

TEST_CASE("metric axioms") {
  std::mt19937_64 rng(78);
  std::vector<LabeledTree> trees;
  for (int i = 0; i < 30; ++i) trees.push_back(fixtures::random_labeled_tree(rng, 6));
  for (const auto &x : trees) {
    CHECK(tree_edit_distance(x, x) == 0.0);
    for (const auto &y : trees) {
      double dxy = tree_edit_distance(x, y);
      CHECK(dxy == tree_edit_distance(y, x));
      if (x.labels != y.labels || x.children != y.children) CHECK(dxy > 0.0);
      for (const auto &z : trees)
        CHECK(tree_edit_distance(x, z) <= dxy + tree_edit_distance(y, z));
    }
  }
}

TEST_CASE("route labels use named reactions when annotated") {
  auto world = fixtures::core_world();
  auto store = world.store();
  const RouteTree *route = nullptr;
  for (const auto &r : world.routes())
    if (r.route_id == "buchwald_single_step") route = &r;
  REQUIRE(route);
  auto plain = labeled_tree(*route);
  auto named = labeled_tree(*route, &store);
  REQUIRE(plain.size() == named.size());
  CHECK(plain.labels[0].rfind("M:", 0) == 0);
  CHECK(plain.labels[1].rfind("R:", 0) == 0);
  CHECK(named.labels[1] == "R:Buchwald-Hartwig Amination");
  CHECK(ted(*route, *route, &store) == 0.0);
}

TEST_CASE("route distance matrix is symmetric with a zero diagonal") {
  auto world = fixtures::core_world();
  auto store = world.store();
  auto m = ted_matrix(world.routes(), &store);
  REQUIRE(m.size() == world.routes().size());
  CHECK(m.symmetric());
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(m(i, i) == 0.0);
    for (std::size_t j = 0; j < m.size(); ++j)
      CHECK(m(i, j) == ted(world.routes()[i], world.routes()[j], &store));
  }
}
