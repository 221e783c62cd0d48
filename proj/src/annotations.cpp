#include "stratengine/annotations.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <vector>

namespace stratengine {

std::string_view to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::reaction: return "reaction";
    case LabelKind::fg: return "fg";
    case LabelKind::ring: return "ring";
  }
  return "?";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::formed: return "formed";
    case EventKind::consumed: return "consumed";
    case EventKind::preserved: return "preserved";
    case EventKind::absent: return "absent";
  }
  return "?";
}

const std::set<std::string> &Vocabularies::of(LabelKind kind) const {
  switch (kind) {
    case LabelKind::reaction: return reactions;
    case LabelKind::fg: return fgs;
    case LabelKind::ring: return rings;
  }
  return reactions;
}

std::set<std::string> &Vocabularies::of(LabelKind kind) {
  return const_cast<std::set<std::string> &>(
      static_cast<const Vocabularies *>(this)->of(kind));
}

bool Vocabularies::contains(LabelKind kind, std::string_view label) const {
  const auto &set = of(kind);
  return set.find(std::string(label)) != set.end();
}

void Vocabularies::require(LabelKind kind, std::string_view label) const {
  if (!contains(kind, label)) {
    throw UnknownLabelError(std::string(to_string(kind)), std::string(label));
  }
}

EventKind classify_event(bool in_any_reactant, bool in_product) {
  if (in_any_reactant && in_product) return EventKind::preserved;
  if (in_any_reactant) return EventKind::consumed;
  if (in_product) return EventKind::formed;
  return EventKind::absent;
}

std::string reaction_key(std::string_view forward_reaction_smiles) {
  auto fields = split(forward_reaction_smiles, '>');
  if (fields.size() != 3) {
    throw Error("malformed reaction string '" +
                std::string(forward_reaction_smiles) + "'");
  }
  std::string key;
  for (std::size_t f = 0; f < 3; ++f) {
    auto parts = split(fields[f], '.');
    parts.erase(std::remove(parts.begin(), parts.end(), std::string()),
                parts.end());
    std::sort(parts.begin(), parts.end());
    if (f) key += '>';
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) key += '.';
      key += parts[i];
    }
  }
  return key;
}

AnnotationStore::AnnotationStore(const AnnotationStore &other)
    : vocab_(other.vocab_),
      reaction_tags_(other.reaction_tags_),
      fg_presence_(other.fg_presence_),
      ring_presence_(other.ring_presence_),
      missing_(other.missing_.load()) {}

AnnotationStore &AnnotationStore::operator=(const AnnotationStore &other) {
  if (this != &other) {
    vocab_ = other.vocab_;
    reaction_tags_ = other.reaction_tags_;
    fg_presence_ = other.fg_presence_;
    ring_presence_ = other.ring_presence_;
    missing_.store(other.missing_.load());
  }
  return *this;
}

AnnotationStore::AnnotationStore(AnnotationStore &&other) noexcept
    : vocab_(std::move(other.vocab_)),
      reaction_tags_(std::move(other.reaction_tags_)),
      fg_presence_(std::move(other.fg_presence_)),
      ring_presence_(std::move(other.ring_presence_)),
      missing_(other.missing_.load()) {}

AnnotationStore &AnnotationStore::operator=(AnnotationStore &&other) noexcept {
  vocab_ = std::move(other.vocab_);
  reaction_tags_ = std::move(other.reaction_tags_);
  fg_presence_ = std::move(other.fg_presence_);
  ring_presence_ = std::move(other.ring_presence_);
  missing_.store(other.missing_.load());
  return *this;
}

void AnnotationStore::add_label(LabelKind kind, const std::string &label) {
  if (label.empty()) throw Error("empty label");
  vocab_.of(kind).insert(label);
}

void AnnotationStore::tag_reaction(std::string_view forward_rsmi,
                                   const std::string &label) {
  vocab_.require(LabelKind::reaction, label);
  reaction_tags_[reaction_key(forward_rsmi)].insert(label);
}

void AnnotationStore::mark_reaction_annotated(std::string_view forward_rsmi) {
  reaction_tags_[reaction_key(forward_rsmi)];
}

void AnnotationStore::set_fg(const std::string &molecule,
                             const std::string &label, bool present) {
  vocab_.require(LabelKind::fg, label);
  fg_presence_[molecule][label] = present;
}

void AnnotationStore::set_ring(const std::string &molecule,
                               const std::string &label, bool present) {
  vocab_.require(LabelKind::ring, label);
  ring_presence_[molecule][label] = present;
}

namespace {

LabelKind parse_kind(std::string_view text, std::size_t line_no) {
  if (text == "reaction") return LabelKind::reaction;
  if (text == "fg") return LabelKind::fg;
  if (text == "ring") return LabelKind::ring;
  throw Error("annotation line " + std::to_string(line_no) +
              ": unknown vocabulary kind '" + std::string(text) + "'");
}

}  // namespace

AnnotationStore AnnotationStore::read(std::istream &in,
                                      const std::string &source_name) {
  AnnotationStore store;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string &msg) -> Error {
    return Error(source_name + " line " + std::to_string(line_no) + ": " + msg);
  };
  auto check_label = [&](LabelKind kind, const std::string &label) {
    if (!store.vocab_.contains(kind, label)) {
      throw fail("label '" + label + "' not in " +
                 std::string(to_string(kind)) + " vocabulary");
    }
  };
  auto parse_bit = [&](const std::string &text) {
    if (text == "1") return true;
    if (text == "0") return false;
    throw fail("presence must be 0 or 1, got '" + text + "'");
  };
  auto set_presence = [&](PresenceMap &map, const std::string &mol,
                          const std::string &label, bool bit) {
    auto &slot = map[mol];
    auto [it, inserted] = slot.emplace(label, bit);
    if (!inserted && it->second != bit) {
      throw fail("conflicting duplicate entry for ('" + mol + "', '" + label +
                 "')");
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    const auto &tag = cols[0];
    if (tag == "#vocab") {
      if (cols.size() != 3 || cols[2].empty()) {
        throw fail("expected '#vocab<TAB>kind<TAB>label'");
      }
      store.vocab_.of(parse_kind(cols[1], line_no)).insert(cols[2]);
    } else if (tag.rfind("#", 0) == 0) {
      continue;
    } else if (tag == "R") {
      if (cols.size() < 2 || cols.size() > 3 || cols[1].empty()) {
        throw fail("expected 'R<TAB>reaction_key[<TAB>label]'");
      }
      std::string key;
      try {
        key = reaction_key(cols[1]);
      } catch (const Error &e) {
        throw fail(e.what());
      }
      auto &tags = store.reaction_tags_[key];
      if (cols.size() == 3 && !cols[2].empty()) {
        check_label(LabelKind::reaction, cols[2]);
        tags.insert(cols[2]);
      }
    } else if (tag == "F" || tag == "G") {
      if (cols.size() != 4 || cols[1].empty()) {
        throw fail("expected '" + tag + "<TAB>molecule<TAB>label<TAB>0|1'");
      }
      auto kind = tag == "F" ? LabelKind::fg : LabelKind::ring;
      check_label(kind, cols[2]);
      set_presence(tag == "F" ? store.fg_presence_ : store.ring_presence_,
                   cols[1], cols[2], parse_bit(cols[3]));
    } else {
      throw fail("unknown record tag '" + tag + "'");
    }
  }
  return store;
}

AnnotationStore AnnotationStore::load(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotation file '" + path + "'");
  return read(in, path);
}

const std::set<std::string> *AnnotationStore::reaction_tags(
    const std::string &key) const {
  auto it = reaction_tags_.find(key);
  return it == reaction_tags_.end() ? nullptr : &it->second;
}

bool AnnotationStore::check_reaction_key(std::string_view label,
                                         const std::string &key) const {
  vocab_.require(LabelKind::reaction, label);
  auto it = reaction_tags_.find(key);
  if (it == reaction_tags_.end()) {
    missing_.fetch_add(1, std::memory_order_relaxed);
    return false;
  }
  return it->second.count(std::string(label)) > 0;
}

bool AnnotationStore::check_reaction(std::string_view label,
                                     const RouteNode &reaction,
                                     Direction direction) const {
  if (!reaction.is_reaction()) throw Error("check_reaction on a molecule node");
  return check_reaction_key(
      label, reaction_key(forward_reaction(reaction.reaction_smiles, direction)));
}

bool AnnotationStore::lookup_presence(const PresenceMap &map, LabelKind kind,
                                      std::string_view label,
                                      const std::string &molecule) const {
  vocab_.require(kind, label);
  auto it = map.find(molecule);
  if (it != map.end()) {
    auto bit = it->second.find(std::string(label));
    if (bit != it->second.end()) return bit->second;
  }
  missing_.fetch_add(1, std::memory_order_relaxed);
  return false;
}

bool AnnotationStore::check_fg(std::string_view label,
                               const std::string &molecule) const {
  return lookup_presence(fg_presence_, LabelKind::fg, label, molecule);
}

bool AnnotationStore::check_ring(std::string_view label,
                                 const std::string &molecule) const {
  return lookup_presence(ring_presence_, LabelKind::ring, label, molecule);
}

FgEvent AnnotationStore::presence_event(const PresenceMap &map, LabelKind kind,
                                        std::string_view label,
                                        const RouteNode &reaction,
                                        Direction direction) const {
  if (!reaction.is_reaction()) throw Error("event query on a molecule node");
  vocab_.require(kind, label);
  auto parts =
      split_reaction(forward_reaction(reaction.reaction_smiles, direction));
  bool in_reactant = false;
  for (const auto &m : parts.reactants) {
    in_reactant = lookup_presence(map, kind, label, m) || in_reactant;
  }
  bool in_product = false;
  for (const auto &m : parts.products) {
    in_product = lookup_presence(map, kind, label, m) || in_product;
  }
  return {std::string(label), classify_event(in_reactant, in_product)};
}

FgEvent AnnotationStore::fg_event(std::string_view label,
                                  const RouteNode &reaction,
                                  Direction direction) const {
  return presence_event(fg_presence_, LabelKind::fg, label, reaction,
                        direction);
}

FgEvent AnnotationStore::ring_event(std::string_view label,
                                    const RouteNode &reaction,
                                    Direction direction) const {
  return presence_event(ring_presence_, LabelKind::ring, label, reaction,
                        direction);
}

bool AnnotationStore::preserved_from_leaf(std::string_view label,
                                          const RouteTree &route) const {
  vocab_.require(LabelKind::ring, label);
  if (!check_ring(label, route.root.smiles)) return false;
  std::vector<const RouteNode *> path;
  bool found = false;
  auto visit = [&](auto &&self, const RouteNode &node) -> void {
    if (found) return;
    if (node.is_molecule() && node.is_leaf()) {
      if (&node == &route.root || !check_ring(label, node.smiles)) return;
      for (const auto *rxn : path) {
        if (ring_event(label, *rxn, route.direction).kind ==
            EventKind::consumed) {
          return;
        }
      }
      found = true;
      return;
    }
    if (node.is_reaction()) path.push_back(&node);
    for (const auto &c : node.children) self(self, c);
    if (node.is_reaction()) path.pop_back();
  };
  visit(visit, route.root);
  return found;
}

std::string AnnotationStore::content_hash() const {
  ContentHasher h;
  for (auto kind : {LabelKind::reaction, LabelKind::fg, LabelKind::ring}) {
    h.field(to_string(kind));
    for (const auto &l : vocab_.of(kind)) h.field(l);
  }
  std::vector<const std::string *> keys;
  for (const auto &[k, _] : reaction_tags_) keys.push_back(&k);
  std::sort(keys.begin(), keys.end(),
            [](auto *a, auto *b) { return *a < *b; });
  for (const auto *k : keys) {
    h.field("R").field(*k);
    for (const auto &l : reaction_tags_.at(*k)) h.field(l);
  }
  for (const auto *map : {&fg_presence_, &ring_presence_}) {
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto &[mol, labels] : *map) {
      for (const auto &[label, bit] : labels) {
        rows.emplace_back(mol + '\t' + label, bit ? "1" : "0");
      }
    }
    std::sort(rows.begin(), rows.end());
    h.field(map == &fg_presence_ ? "F" : "G");
    for (const auto &[k, v] : rows) h.field(k).field(v);
  }
  return h.hex();
}

}  // namespace stratengine
