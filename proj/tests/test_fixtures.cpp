#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <set>

#include "fixture_world.hpp"

namespace fs = std::filesystem;

namespace {

std::set<std::string> relative_files(const fs::path &root) {
  std::set<std::string> out;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).string());
  return out;
}

}  // namespace

TEST_CASE("checked-in fixtures match the generators") {
  auto tmp = fs::temp_directory_path() / ("stratengine-fixtures-" + std::to_string(std::random_device{}()));
  fixtures::write_all(tmp.string());
  const fs::path checked_in = STRATENGINE_FIXTURE_DIR;
  auto generated = relative_files(tmp);
  CHECK(generated == relative_files(checked_in));
  for (const auto &rel : generated) {
    INFO(rel << " is stale; regenerate with make_fixtures");
    CHECK(fixtures::read_text((tmp / rel).string()) == fixtures::read_text((checked_in / rel).string()));
  }
  fs::remove_all(tmp);
}

TEST_CASE("fixture worlds have the advertised shape") {
  CHECK(fixtures::screening_world().routes().size() == 10);
  CHECK(fixtures::screening_world().rules().size() == 4);
  CHECK(fixtures::decoy_world().routes().size() == 30);
  auto balance = fixtures::balance_world();
  std::map<std::string, int> per_target;
  for (const auto &r : balance.routes()) ++per_target[r.root.smiles];
  CHECK(per_target.size() == 20);
  for (const auto &[target, n] : per_target) {
    CHECK(n >= 5);
    CHECK(n <= 8);
  }
}
