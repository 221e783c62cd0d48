#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stratengine/annotations.hpp"
#include "stratengine/rule.hpp"

namespace stratengine {

enum class Combinator { all_of, any_of };  // "AND" / "OR"

struct SubQuery {
  std::string description;
  bool negated = false;
  CategoricalLabels atomic;  // may be empty: semantic-only sub-query
};

struct StructuredQuery {
  Combinator combinator = Combinator::all_of;
  std::vector<SubQuery> subqueries;
};

// {"combinator": "AND"|"OR", "subqueries": [{"description": ...,
//   "negated": false, "atomic": {"reactions": [], "fgs": [], "rings": []}}]}
StructuredQuery parse_query(std::string_view json_text,
                            const Vocabularies *vocab = nullptr);
StructuredQuery query_from_json(const nlohmann::json &j,
                                const Vocabularies *vocab = nullptr);
nlohmann::json query_to_json(const StructuredQuery &query);

}  // namespace stratengine
