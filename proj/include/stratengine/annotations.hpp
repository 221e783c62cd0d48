#pragma once

// Precomputed chemical annotations (named reactions, functional groups,
// ring systems) and the checker API strategy rules are evaluated against.

#include <atomic>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>

#include "stratengine/common.hpp"
#include "stratengine/route.hpp"

namespace stratengine {

enum class LabelKind { reaction, fg, ring };

std::string_view to_string(LabelKind kind);

struct Vocabularies {
  std::set<std::string> reactions;
  std::set<std::string> fgs;
  std::set<std::string> rings;

  const std::set<std::string> &of(LabelKind kind) const;
  std::set<std::string> &of(LabelKind kind);
  bool contains(LabelKind kind, std::string_view label) const;
  // Throws UnknownLabelError when absent.
  void require(LabelKind kind, std::string_view label) const;
};

enum class EventKind { formed, consumed, preserved, absent };

std::string_view to_string(EventKind kind);

struct FgEvent {
  std::string label;
  EventKind kind = EventKind::absent;
};

// Presence on each side of a reaction (agents are not considered).
EventKind classify_event(bool in_any_reactant, bool in_product);

// Order-insensitive reaction key: components of each field sorted.
std::string reaction_key(std::string_view forward_reaction_smiles);

class AnnotationStore {
 public:
  AnnotationStore() = default;
  AnnotationStore(const AnnotationStore &other);
  AnnotationStore &operator=(const AnnotationStore &other);
  AnnotationStore(AnnotationStore &&other) noexcept;
  AnnotationStore &operator=(AnnotationStore &&other) noexcept;

  static AnnotationStore load(const std::string &path);
  static AnnotationStore read(std::istream &in,
                              const std::string &source_name = "<stream>");

  const Vocabularies &vocabularies() const { return vocab_; }

  // Builders; labels must already be in the vocabulary.
  void add_label(LabelKind kind, const std::string &label);
  void tag_reaction(std::string_view forward_rsmi, const std::string &label);
  void mark_reaction_annotated(std::string_view forward_rsmi);
  void set_fg(const std::string &molecule, const std::string &label,
              bool present);
  void set_ring(const std::string &molecule, const std::string &label,
                bool present);

  bool check_reaction(std::string_view label, const RouteNode &reaction,
                      Direction direction = Direction::forward) const;
  bool check_reaction_key(std::string_view label,
                          const std::string &key) const;
  bool check_fg(std::string_view label, const std::string &molecule) const;
  bool check_ring(std::string_view label, const std::string &molecule) const;

  FgEvent fg_event(std::string_view label, const RouteNode &reaction,
                   Direction direction = Direction::forward) const;
  FgEvent ring_event(std::string_view label, const RouteNode &reaction,
                     Direction direction = Direction::forward) const;

  // Ring present in some leaf and in the root, and not consumed by any
  // reaction on that leaf's path to the root.
  bool preserved_from_leaf(std::string_view label,
                           const RouteTree &route) const;

  // Labels recorded for a reaction key, or nullopt if never annotated.
  const std::set<std::string> *reaction_tags(const std::string &key) const;

  std::uint64_t missing_annotations() const {
    return missing_.load(std::memory_order_relaxed);
  }
  void reset_diagnostics() const { missing_.store(0); }

  std::string content_hash() const;

 private:
  using PresenceMap =
      std::unordered_map<std::string, std::unordered_map<std::string, bool>>;

  bool lookup_presence(const PresenceMap &map, LabelKind kind,
                       std::string_view label,
                       const std::string &molecule) const;
  FgEvent presence_event(const PresenceMap &map, LabelKind kind,
                         std::string_view label, const RouteNode &reaction,
                         Direction direction) const;

  Vocabularies vocab_;
  std::unordered_map<std::string, std::set<std::string>> reaction_tags_;
  PresenceMap fg_presence_;
  PresenceMap ring_presence_;
  mutable std::atomic<std::uint64_t> missing_{0};
};

}  // namespace stratengine
