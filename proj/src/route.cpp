#include "stratengine/route.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace stratengine {

using nlohmann::json;

std::string_view to_string(Direction d) {
  return d == Direction::retro ? "retro" : "forward";
}

Direction parse_direction(std::string_view text) {
  if (text == "retro") return Direction::retro;
  if (text == "forward") return Direction::forward;
  throw Error("unknown reaction direction '" + std::string(text) +
              "' (expected retro|forward)");
}

ReactionParts split_reaction(std::string_view reaction_smiles) {
  auto fields = split(reaction_smiles, '>');
  if (fields.size() != 3) {
    throw Error("malformed reaction string '" + std::string(reaction_smiles) +
                "' (expected reactants>agents>products)");
  }
  auto components = [](const std::string &field) {
    std::vector<std::string> out;
    if (field.empty()) return out;
    for (auto &c : split(field, '.')) {
      if (!c.empty()) out.push_back(std::move(c));
    }
    return out;
  };
  return {components(fields[0]), components(fields[1]), components(fields[2])};
}

std::string reverse_reaction(std::string_view reaction_smiles) {
  auto fields = split(reaction_smiles, '>');
  if (fields.size() != 3) {
    throw Error("malformed reaction string '" + std::string(reaction_smiles) +
                "'");
  }
  return fields[2] + ">" + fields[1] + ">" + fields[0];
}

std::string forward_reaction(std::string_view reaction_smiles, Direction d) {
  if (d == Direction::retro) return reverse_reaction(reaction_smiles);
  return std::string(reaction_smiles);
}

namespace {

bool well_formed_reaction(std::string_view rsmi) {
  return std::count(rsmi.begin(), rsmi.end(), '>') == 2;
}

std::string child_path(const std::string &parent, std::size_t i) {
  return parent + "/" + std::to_string(i);
}

std::optional<std::string> string_field(const json &obj, const char *key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  return std::nullopt;
}

struct NodeParser {
  std::vector<std::pair<RouteNode *, std::string>> unnamed;  // node, path
  std::unordered_set<std::string> explicit_ids;

  RouteNode parse(const json &j, const std::string &path,
                  std::optional<NodeType> parent) {
    if (!j.is_object()) throw RouteError("node is not a JSON object", path);
    RouteNode node;
    auto type = string_field(j, "type");
    if (!type) throw RouteError("missing node type", path);
    if (*type == "mol" || *type == "molecule") {
      node.type = NodeType::molecule;
    } else if (*type == "reaction") {
      node.type = NodeType::reaction;
    } else {
      throw RouteError("unknown node type '" + *type + "'", path);
    }
    if (!parent && node.is_reaction()) {
      throw RouteError("root must be a molecule node", path);
    }
    if (parent && *parent == node.type) {
      throw RouteError("type alternation violated", path);
    }

    json meta = json::object();
    if (auto it = j.find("metadata"); it != j.end() && !it->is_null()) {
      if (!it->is_object()) throw RouteError("metadata is not an object", path);
      meta = *it;
    }

    if (node.is_molecule()) {
      auto smiles = string_field(j, "smiles");
      if (!smiles || smiles->empty()) {
        throw RouteError("missing smiles for molecule node", path);
      }
      node.smiles = *smiles;
    } else {
      auto rsmi = string_field(meta, "rsmi");
      if (!rsmi) rsmi = string_field(j, "rsmi");
      if (!rsmi || rsmi->empty()) {
        throw RouteError("missing reaction_smiles for reaction node", path);
      }
      if (!well_formed_reaction(*rsmi)) {
        throw RouteError("malformed reaction string '" + *rsmi + "'", path);
      }
      node.reaction_smiles = *rsmi;
      auto mapped = string_field(meta, "mapped_reaction_smiles");
      if (!mapped) mapped = string_field(meta, "mapped_rsmi");
      node.mapped_reaction_smiles = mapped;
      meta.erase("rsmi");
      meta.erase("mapped_reaction_smiles");
      meta.erase("mapped_rsmi");
    }
    node.metadata = std::move(meta);

    if (auto it = j.find("node_id"); it != j.end() && !it->is_null()) {
      if (it->is_string()) {
        node.node_id = it->get<std::string>();
      } else if (it->is_number_integer()) {
        node.node_id = std::to_string(it->get<long long>());
      } else {
        throw RouteError("node_id must be a string", path);
      }
      if (!explicit_ids.insert(node.node_id).second) {
        throw RouteError("duplicate node_id '" + node.node_id + "'", path);
      }
    }

    if (auto it = j.find("children"); it != j.end() && !it->is_null()) {
      if (!it->is_array()) throw RouteError("children is not an array", path);
      node.children.reserve(it->size());
      for (std::size_t i = 0; i < it->size(); ++i) {
        node.children.push_back(
            parse((*it)[i], child_path(path, i), node.type));
      }
    }
    if (node.is_reaction() && node.children.empty()) {
      throw RouteError("reaction node without children", path);
    }
    return node;
  }

  void assign_ids(RouteNode &root) {
    std::size_t index = 0;
    assign(root, "root", index);
  }

  void assign(RouteNode &node, const std::string &path, std::size_t &index) {
    if (node.node_id.empty()) {
      node.node_id = "n" + std::to_string(index);
      if (!explicit_ids.insert(node.node_id).second) {
        throw RouteError("generated node_id '" + node.node_id +
                             "' collides with an explicit id",
                         path);
      }
    }
    ++index;
    for (std::size_t i = 0; i < node.children.size(); ++i) {
      assign(node.children[i], child_path(path, i), index);
    }
  }
};

void validate_node(const RouteNode &node, const std::string &path,
                   std::optional<NodeType> parent,
                   std::unordered_set<std::string> &ids) {
  if (!parent && node.is_reaction()) {
    throw RouteError("root must be a molecule node", path);
  }
  if (parent && *parent == node.type) {
    throw RouteError("type alternation violated", path);
  }
  if (node.is_molecule() && node.smiles.empty()) {
    throw RouteError("missing smiles for molecule node", path);
  }
  if (node.is_reaction()) {
    if (node.reaction_smiles.empty()) {
      throw RouteError("missing reaction_smiles for reaction node", path);
    }
    if (node.children.empty()) {
      throw RouteError("reaction node without children", path);
    }
  }
  if (node.node_id.empty()) throw RouteError("empty node_id", path);
  if (!ids.insert(node.node_id).second) {
    throw RouteError("duplicate node_id '" + node.node_id + "'", path);
  }
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    validate_node(node.children[i], child_path(path, i), node.type, ids);
  }
}

}  // namespace

void validate_route(const RouteTree &route) {
  std::unordered_set<std::string> ids;
  validate_node(route.root, "root", std::nullopt, ids);
}

RouteTree route_from_json(const json &j, Direction default_direction) {
  RouteTree route;
  route.direction = default_direction;
  const json *tree = &j;
  if (j.is_object() && j.contains("tree")) {
    tree = &j.at("tree");
    if (auto id = j.find("route_id"); id != j.end() && !id->is_null()) {
      route.route_id = id->is_string() ? id->get<std::string>() : id->dump();
    }
    if (auto y = j.find("year"); y != j.end() && !y->is_null()) {
      if (!y->is_number_integer()) throw Error("route year must be an integer");
      route.year = y->get<int>();
    }
    route.source = string_field(j, "source");
    if (auto d = string_field(j, "direction")) {
      route.direction = parse_direction(*d);
    }
  }
  NodeParser parser;
  route.root = parser.parse(*tree, "root", std::nullopt);
  parser.assign_ids(route.root);
  return route;
}

RouteTree parse_route(std::string_view json_text, Direction default_direction) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error &e) {
    throw Error(std::string("malformed JSON: ") + e.what());
  }
  return route_from_json(j, default_direction);
}

json node_to_json(const RouteNode &node) {
  json j = json::object();
  j["type"] = node.is_molecule() ? "mol" : "reaction";
  j["node_id"] = node.node_id;
  json meta = node.metadata.is_object() ? node.metadata : json::object();
  if (node.is_molecule()) {
    j["smiles"] = node.smiles;
  } else {
    meta["rsmi"] = node.reaction_smiles;
    if (node.mapped_reaction_smiles) {
      meta["mapped_reaction_smiles"] = *node.mapped_reaction_smiles;
    }
  }
  if (!meta.empty()) j["metadata"] = std::move(meta);
  json children = json::array();
  for (const auto &c : node.children) children.push_back(node_to_json(c));
  j["children"] = std::move(children);
  return j;
}

json route_to_json(const RouteTree &route) {
  json j = json::object();
  j["route_id"] = route.route_id;
  if (route.year) j["year"] = *route.year;
  if (route.source) j["source"] = *route.source;
  if (route.direction == Direction::retro) j["direction"] = "retro";
  j["tree"] = node_to_json(route.root);
  return j;
}

std::string serialize_route(const RouteTree &route) {
  return route_to_json(route).dump();
}

std::string subtree_signature(const RouteNode &node) {
  std::string sig = node.is_molecule() ? "M(" + node.smiles + ")"
                                       : "R(" + node.reaction_smiles + ")";
  sig += "[";
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (i) sig += ",";
    sig += subtree_signature(node.children[i]);
  }
  sig += "]";
  return sig;
}

namespace {

struct CanonInfo {
  int height = 0;  // reaction levels below and including this node
  std::size_t size = 1;
  std::string signature;
};

CanonInfo canonicalize_node(RouteNode &node, Direction direction) {
  if (node.is_reaction()) {
    node.reaction_smiles = forward_reaction(node.reaction_smiles, direction);
    if (node.mapped_reaction_smiles) {
      node.mapped_reaction_smiles =
          forward_reaction(*node.mapped_reaction_smiles, direction);
    }
  }
  std::vector<std::pair<CanonInfo, RouteNode>> kids;
  kids.reserve(node.children.size());
  for (auto &c : node.children) {
    auto info = canonicalize_node(c, direction);
    kids.emplace_back(std::move(info), std::move(c));
  }
  std::stable_sort(kids.begin(), kids.end(), [](const auto &a, const auto &b) {
    if (a.first.height != b.first.height) return a.first.height > b.first.height;
    if (a.first.size != b.first.size) return a.first.size > b.first.size;
    return a.first.signature < b.first.signature;
  });

  CanonInfo info;
  int child_height = 0;
  info.signature = node.is_molecule() ? "M(" + node.smiles + ")["
                                      : "R(" + node.reaction_smiles + ")[";
  node.children.clear();
  for (std::size_t i = 0; i < kids.size(); ++i) {
    child_height = std::max(child_height, kids[i].first.height);
    info.size += kids[i].first.size;
    if (i) info.signature += ",";
    info.signature += kids[i].first.signature;
    node.children.push_back(std::move(kids[i].second));
  }
  info.signature += "]";
  info.height = child_height + (node.is_reaction() ? 1 : 0);
  return info;
}

}  // namespace

RouteTree canonicalize(const RouteTree &route) {
  RouteTree out = route;
  canonicalize_node(out.root, route.direction);
  out.direction = Direction::forward;
  return out;
}

int DepthMap::at(const std::string &node_id) const {
  auto it = depth.find(node_id);
  if (it == depth.end()) throw Error("no depth for node '" + node_id + "'");
  return it->second;
}

namespace {

void walk_depths(const RouteNode &node, int depth, DepthMap &map) {
  map.depth[node.node_id] = depth;
  if (node.is_reaction()) map.max_depth = std::max(map.max_depth, depth);
  int next = node.is_molecule() ? depth + 1 : depth;
  for (const auto &c : node.children) walk_depths(c, next, map);
}

}  // namespace

DepthMap depth_map(const RouteTree &route) {
  DepthMap map;
  walk_depths(route.root, 0, map);
  return map;
}

std::size_t node_count(const RouteNode &node) {
  std::size_t n = 0;
  for_each_node(node, [&](const RouteNode &) { ++n; });
  return n;
}

Topology topology(const RouteTree &route) {
  Topology t;
  for_each_node(route.root, [&](const RouteNode &n) {
    if (n.is_reaction()) {
      ++t.step_count;
      int built = 0;
      for (const auto &c : n.children) built += c.is_leaf() ? 0 : 1;
      if (built >= 2) t.is_convergent = true;
    } else if (n.is_leaf()) {
      ++t.leaf_count;
    }
  });
  t.max_depth = depth_map(route).max_depth;
  t.longest_linear_sequence = t.max_depth;
  return t;
}

// --- extraction ---

namespace {

struct Extractor {
  std::span<const ReactionRecord> reactions;
  std::vector<ReactionParts> parts;
  std::unordered_map<std::string, std::vector<std::size_t>> producers;

  explicit Extractor(std::span<const ReactionRecord> rx) : reactions(rx) {
    parts.reserve(rx.size());
    for (std::size_t i = 0; i < rx.size(); ++i) {
      parts.push_back(split_reaction(rx[i].reaction_smiles));
      std::set<std::string> seen;
      for (const auto &p : parts.back().products) {
        if (seen.insert(p).second) producers[p].push_back(i);
      }
    }
  }

  RouteNode expand(const std::string &molecule,
                   std::vector<std::string> &path) {
    RouteNode node;
    node.type = NodeType::molecule;
    node.smiles = molecule;
    if (std::find(path.begin(), path.end(), molecule) != path.end()) {
      return node;
    }
    auto it = producers.find(molecule);
    if (it == producers.end()) return node;

    std::size_t chosen = it->second.front();
    const auto &record = reactions[chosen];
    RouteNode rxn;
    rxn.type = NodeType::reaction;
    rxn.reaction_smiles = record.reaction_smiles;
    rxn.metadata["patent_id"] = record.patent_id;
    if (record.year) rxn.metadata["year"] = *record.year;
    rxn.metadata["alternates"] = it->second.size() - 1;

    path.push_back(molecule);
    for (const auto &reactant : parts[chosen].reactants) {
      rxn.children.push_back(expand(reactant, path));
    }
    path.pop_back();
    if (rxn.children.empty()) return node;  // no reactants recorded
    node.children.push_back(std::move(rxn));
    return node;
  }
};

void number_nodes(RouteNode &node, std::size_t &index) {
  node.node_id = "n" + std::to_string(index++);
  for (auto &c : node.children) number_nodes(c, index);
}

std::string route_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "route_%06zu", i);
  return buf;
}

}  // namespace

std::vector<ExtractedRoute> extract_routes(
    std::span<const ReactionRecord> reactions,
    std::span<const std::string> roots) {
  Extractor ex(reactions);
  std::vector<ExtractedRoute> out;
  out.reserve(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) {
    std::vector<std::string> path;
    ExtractedRoute er;
    er.route.root = ex.expand(roots[i], path);
    er.route.route_id = route_name(i);
    er.root_produced = !er.route.root.children.empty();
    if (er.root_produced) {
      const auto &meta = er.route.root.children.front().metadata;
      if (meta.contains("year")) er.route.year = meta["year"].get<int>();
      er.route.source = meta["patent_id"].get<std::string>();
    }
    std::size_t index = 0;
    number_nodes(er.route.root, index);
    out.push_back(std::move(er));
  }
  return out;
}

std::vector<std::string> terminal_products(
    std::span<const ReactionRecord> reactions) {
  std::unordered_set<std::string> used_as_reactant;
  std::vector<ReactionParts> parts;
  parts.reserve(reactions.size());
  for (const auto &r : reactions) {
    parts.push_back(split_reaction(r.reaction_smiles));
    for (const auto &m : parts.back().reactants) used_as_reactant.insert(m);
  }
  std::vector<std::string> roots;
  std::unordered_set<std::string> emitted;
  for (const auto &p : parts) {
    for (const auto &m : p.products) {
      if (!used_as_reactant.count(m) && emitted.insert(m).second) {
        roots.push_back(m);
      }
    }
  }
  return roots;
}

std::vector<ReactionRecord> read_reaction_tsv(std::istream &in) {
  std::vector<ReactionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line_no == 1 && line.rfind("reaction_smiles", 0) == 0) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3) {
      throw Error("line " + std::to_string(line_no) +
                  ": expected 3 tab-separated columns, got " +
                  std::to_string(cols.size()));
    }
    ReactionRecord rec;
    rec.reaction_smiles = std::string(trim(cols[0]));
    if (!well_formed_reaction(rec.reaction_smiles)) {
      throw Error("line " + std::to_string(line_no) +
                  ": malformed reaction string '" + rec.reaction_smiles + "'");
    }
    auto year = trim(cols[1]);
    if (!year.empty()) {
      try {
        std::size_t used = 0;
        rec.year = std::stoi(std::string(year), &used);
        if (used != year.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception &) {
        throw Error("line " + std::to_string(line_no) + ": bad year '" +
                    std::string(year) + "'");
      }
    }
    rec.patent_id = std::string(trim(cols[2]));
    out.push_back(std::move(rec));
  }
  return out;
}

// --- corpus ---

Corpus read_corpus(std::istream &in) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error &e) {
      throw Error("corpus line " + std::to_string(line_no) +
                  ": malformed JSON: " + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("schema_version")) {
        throw Error("corpus line " + std::to_string(line_no) +
                    ": missing header record {schema_version, direction}");
      }
      if (j["schema_version"] != 1) {
        throw Error("unsupported corpus schema_version " +
                    j["schema_version"].dump());
      }
      corpus.direction =
          parse_direction(j.value("direction", std::string("forward")));
      have_header = true;
      continue;
    }
    RouteTree route;
    try {
      route = route_from_json(j, corpus.direction);
    } catch (const Error &e) {
      throw Error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (route.route_id.empty()) {
      route.route_id = route_name(corpus.routes.size());
    }
    if (!ids.insert(route.route_id).second) {
      throw Error("corpus line " + std::to_string(line_no) +
                  ": duplicate route_id '" + route.route_id + "'");
    }
    corpus.routes.push_back(std::move(route));
  }
  if (!have_header) throw Error("corpus is missing its header record");
  return corpus;
}

Corpus load_corpus(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus '" + path + "'");
  return read_corpus(in);
}

void write_corpus(std::ostream &out, const Corpus &corpus) {
  json header = {{"schema_version", 1},
                 {"direction", std::string(to_string(corpus.direction))}};
  out << header.dump() << '\n';
  for (const auto &r : corpus.routes) {
    json j = route_to_json(r);
    j.erase("direction");
    if (r.direction != corpus.direction) {
      j["direction"] = std::string(to_string(r.direction));
    }
    out << j.dump() << '\n';
  }
}

std::string corpus_hash(const Corpus &corpus) {
  std::ostringstream os;
  write_corpus(os, corpus);
  return to_hex64(hash_bytes(os.str()));
}

}  // namespace stratengine
