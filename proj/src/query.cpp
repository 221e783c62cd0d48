#include "stratengine/query.hpp"

namespace stratengine {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string &msg) {
  throw Error("query schema: " + msg);
}

void read_labels(const json &atomic, const char *field, LabelKind kind,
                 std::set<std::string> &out, const Vocabularies *vocab) {
  if (!atomic.contains(field)) return;
  const auto &arr = atomic[field];
  if (!arr.is_array()) schema_error(std::string("atomic.") + field + " must be an array");
  for (const auto &v : arr) {
    if (!v.is_string()) {
      schema_error(std::string("atomic.") + field + " entries must be strings");
    }
    auto label = v.get<std::string>();
    if (vocab) vocab->require(kind, label);
    out.insert(std::move(label));
  }
}

}  // namespace

StructuredQuery query_from_json(const json &j, const Vocabularies *vocab) {
  if (!j.is_object()) schema_error("top level must be an object");
  for (const auto &[key, _] : j.items()) {
    if (key != "combinator" && key != "subqueries") {
      schema_error("unexpected field '" + key + "'");
    }
  }
  StructuredQuery q;
  if (j.contains("combinator")) {
    if (!j["combinator"].is_string()) schema_error("combinator must be a string");
    auto c = j["combinator"].get<std::string>();
    if (c == "AND") {
      q.combinator = Combinator::all_of;
    } else if (c == "OR") {
      q.combinator = Combinator::any_of;
    } else {
      schema_error("combinator must be \"AND\" or \"OR\", got \"" + c + "\"");
    }
  }
  if (!j.contains("subqueries") || !j["subqueries"].is_array()) {
    schema_error("subqueries must be an array");
  }
  if (j["subqueries"].empty()) schema_error("subqueries must not be empty");
  for (const auto &s : j["subqueries"]) {
    if (!s.is_object()) schema_error("each subquery must be an object");
    for (const auto &[key, _] : s.items()) {
      if (key != "description" && key != "negated" && key != "atomic") {
        schema_error("unexpected subquery field '" + key + "'");
      }
    }
    SubQuery sub;
    if (!s.contains("description") || !s["description"].is_string()) {
      schema_error("subquery description must be a string");
    }
    sub.description = s["description"].get<std::string>();
    if (s.contains("negated")) {
      if (!s["negated"].is_boolean()) schema_error("negated must be a boolean");
      sub.negated = s["negated"].get<bool>();
    }
    if (s.contains("atomic")) {
      const auto &a = s["atomic"];
      if (!a.is_object()) schema_error("atomic must be an object");
      for (const auto &[key, _] : a.items()) {
        if (key != "reactions" && key != "fgs" && key != "rings") {
          schema_error("unexpected atomic field '" + key + "'");
        }
      }
      read_labels(a, "reactions", LabelKind::reaction, sub.atomic.reactions, vocab);
      read_labels(a, "fgs", LabelKind::fg, sub.atomic.fgs, vocab);
      read_labels(a, "rings", LabelKind::ring, sub.atomic.rings, vocab);
    }
    q.subqueries.push_back(std::move(sub));
  }
  return q;
}

StructuredQuery parse_query(std::string_view json_text,
                            const Vocabularies *vocab) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception &e) {
    throw Error(std::string("malformed query JSON: ") + e.what());
  }
  return query_from_json(j, vocab);
}

json query_to_json(const StructuredQuery &query) {
  json subs = json::array();
  for (const auto &s : query.subqueries) {
    subs.push_back({{"description", s.description},
                    {"negated", s.negated},
                    {"atomic",
                     {{"reactions", s.atomic.reactions},
                      {"fgs", s.atomic.fgs},
                      {"rings", s.atomic.rings}}}});
  }
  return {{"combinator", query.combinator == Combinator::all_of ? "AND" : "OR"},
          {"subqueries", subs}};
}

}  // namespace stratengine
