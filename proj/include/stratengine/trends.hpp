#pragma once

// Per-year pass fractions of rules over a dated, fingerprinted corpus.

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stratengine/fingerprint.hpp"
#include "stratengine/strategy.hpp"

namespace stratengine {

struct DatedFingerprint {
  std::string route_id;
  std::optional<int> year;
  BitVector bits;
};

struct YearCount {
  std::size_t pass = 0;
  std::size_t total = 0;
  double fraction = 0.0;

  bool operator==(const YearCount &) const = default;
};

struct TrendSeries {
  std::string rule_id;
  std::map<int, YearCount> years;

  bool operator==(const TrendSeries &) const = default;
};

struct TrendDiagnostics {
  std::vector<std::string> undated_routes;
};

// Series in the order of rule_ids. Years with no dated routes are omitted.
std::vector<TrendSeries> yearly_fractions(
    std::span<const DatedFingerprint> routes, const RuleLibrary &library,
    std::span<const std::string> rule_ids, TrendDiagnostics *diag = nullptr);

// Header "rule_id,year,pass,total,fraction"; one row per (rule, year).
void write_series_csv(std::ostream &out, std::span<const TrendSeries> series);
std::vector<TrendSeries> read_series_csv(std::istream &in);

nlohmann::json series_to_json(std::span<const TrendSeries> series);
std::vector<TrendSeries> series_from_json(const nlohmann::json &j);

}  // namespace stratengine
