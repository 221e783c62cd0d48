#pragma once

// Synthesis route trees: parsing, validation, canonical ordering, depth
// bookkeeping and extraction from flat single-step reaction lists.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stratengine/common.hpp"

namespace stratengine {

enum class NodeType { molecule, reaction };

// How reaction strings are stored: retro is "products>agents>reactants".
enum class Direction { forward, retro };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view text);

struct RouteNode {
  NodeType type = NodeType::molecule;
  std::string smiles;           // molecule nodes
  std::string reaction_smiles;  // reaction nodes, "reactants>agents>products"
  std::optional<std::string> mapped_reaction_smiles;
  std::string node_id;
  nlohmann::json metadata = nlohmann::json::object();  // passthrough fields
  std::vector<RouteNode> children;

  bool is_reaction() const { return type == NodeType::reaction; }
  bool is_molecule() const { return type == NodeType::molecule; }
  bool is_leaf() const { return children.empty(); }
};

struct RouteTree {
  RouteNode root;
  std::string route_id;
  std::optional<int> year;
  std::optional<std::string> source;
  Direction direction = Direction::forward;
};

// Thrown for schema and invariant violations; path is "root/0/1" style.
class RouteError : public Error {
 public:
  RouteError(const std::string &message, std::string path)
      : Error(message + " at path " + path), path_(std::move(path)) {}
  const std::string &path() const { return path_; }

 private:
  std::string path_;
};

// The three '>'-separated fields of a reaction string, each split on '.'.
struct ReactionParts {
  std::vector<std::string> reactants;
  std::vector<std::string> agents;
  std::vector<std::string> products;
};

ReactionParts split_reaction(std::string_view reaction_smiles);
// Swaps the outer fields: "P>agents>A.B" <-> "A.B>agents>P".
std::string reverse_reaction(std::string_view reaction_smiles);
// Reaction string as forward, whatever the storage direction.
std::string forward_reaction(std::string_view reaction_smiles, Direction d);

// Accepts either a bare root node object or a route record
// {route_id, year, source, direction, tree}.
RouteTree parse_route(std::string_view json_text,
                      Direction default_direction = Direction::forward);
RouteTree route_from_json(const nlohmann::json &j,
                          Direction default_direction = Direction::forward);
nlohmann::json route_to_json(const RouteTree &route);
nlohmann::json node_to_json(const RouteNode &node);
std::string serialize_route(const RouteTree &route);

// Checks every node invariant; throws RouteError naming the first bad node.
void validate_route(const RouteTree &route);

// Children sorted by (height desc, size desc, content string asc) and
// reaction strings normalized to forward direction. Idempotent.
RouteTree canonicalize(const RouteTree &route);

// Content signature of a subtree, independent of node ids and metadata.
std::string subtree_signature(const RouteNode &node);

struct DepthMap {
  std::unordered_map<std::string, int> depth;  // node_id -> depth
  int max_depth = 0;

  int at(const std::string &node_id) const;
};

// Root molecule has depth 0; the depth increments when stepping from a
// molecule into its producing reaction, so the final step has depth 1.
DepthMap depth_map(const RouteTree &route);

struct Topology {
  int step_count = 0;
  int leaf_count = 0;
  int max_depth = 0;
  bool is_convergent = false;
  int longest_linear_sequence = 0;

  bool operator==(const Topology &) const = default;
};

Topology topology(const RouteTree &route);

// Preorder walk over all nodes.
template <typename Fn>
void for_each_node(const RouteNode &node, Fn &&fn) {
  fn(node);
  for (const auto &c : node.children) for_each_node(c, fn);
}

std::size_t node_count(const RouteNode &node);

// --- extraction from single-step reaction lists ---

struct ReactionRecord {
  std::string reaction_smiles;  // forward direction
  std::optional<int> year;
  std::string patent_id;
};

struct ExtractedRoute {
  RouteTree route;
  bool root_produced = true;  // false: root has no producing reaction
};

std::vector<ExtractedRoute> extract_routes(
    std::span<const ReactionRecord> reactions,
    std::span<const std::string> roots);

// Products that never appear as a reactant, in first-appearance order.
std::vector<std::string> terminal_products(
    std::span<const ReactionRecord> reactions);

// TSV columns reaction_smiles, year, patent_id; an optional header line
// starting with "reaction_smiles" is skipped.
std::vector<ReactionRecord> read_reaction_tsv(std::istream &in);

// --- corpus files: header record then one route per line ---

struct Corpus {
  Direction direction = Direction::forward;
  std::vector<RouteTree> routes;
};

Corpus read_corpus(std::istream &in);
Corpus load_corpus(const std::string &path);
void write_corpus(std::ostream &out, const Corpus &corpus);
std::string corpus_hash(const Corpus &corpus);

}  // namespace stratengine
