#include "stratengine/trends.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

namespace stratengine {

std::vector<TrendSeries> yearly_fractions(
    std::span<const DatedFingerprint> routes, const RuleLibrary &library,
    std::span<const std::string> rule_ids, TrendDiagnostics *diag) {
  std::vector<std::size_t> positions;
  for (const auto &id : rule_ids) {
    auto pos = library.index_of(id);
    if (!pos) throw Error("unknown rule id '" + id + "'");
    positions.push_back(*pos);
  }

  std::map<int, std::size_t> totals;
  for (const auto &r : routes) {
    if (r.bits.size() != library.size()) {
      throw Error("fingerprint for '" + r.route_id + "' has " +
                  std::to_string(r.bits.size()) + " bits, library has " +
                  std::to_string(library.size()) + " rules");
    }
    if (!r.year) {
      if (diag) diag->undated_routes.push_back(r.route_id);
      continue;
    }
    ++totals[*r.year];
  }

  std::vector<TrendSeries> out(positions.size());
  for (std::size_t k = 0; k < positions.size(); ++k) {
    out[k].rule_id = library[positions[k]].rule_id;
    for (const auto &[year, total] : totals) out[k].years[year].total = total;
  }
  for (const auto &r : routes) {
    if (!r.year) continue;
    for (std::size_t k = 0; k < positions.size(); ++k) {
      if (r.bits.test(positions[k])) ++out[k].years[*r.year].pass;
    }
  }
  for (auto &s : out) {
    for (auto &[year, c] : s.years) {
      c.fraction = static_cast<double>(c.pass) / static_cast<double>(c.total);
    }
  }
  return out;
}

void write_series_csv(std::ostream &out, std::span<const TrendSeries> series) {
  out << "rule_id,year,pass,total,fraction\n";
  char buf[32];
  for (const auto &s : series) {
    for (const auto &[year, c] : s.years) {
      std::snprintf(buf, sizeof(buf), "%.6f", c.fraction);
      out << s.rule_id << ',' << year << ',' << c.pass << ',' << c.total << ','
          << buf << '\n';
    }
  }
}

std::vector<TrendSeries> read_series_csv(std::istream &in) {
  std::string line;
  if (!std::getline(in, line) || line != "rule_id,year,pass,total,fraction") {
    throw Error("trend CSV must start with 'rule_id,year,pass,total,fraction'");
  }
  std::vector<TrendSeries> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 5) {
      throw Error("trend CSV line " + std::to_string(line_no) +
                  ": expected 5 columns");
    }
    if (out.empty() || out.back().rule_id != f[0]) {
      out.push_back(TrendSeries{f[0], {}});
    }
    YearCount c;
    int year = 0;
    try {
      year = std::stoi(f[1]);
      c.pass = std::stoul(f[2]);
      c.total = std::stoul(f[3]);
    } catch (const std::exception &) {
      throw Error("trend CSV line " + std::to_string(line_no) +
                  ": non-numeric field");
    }
    if (c.total == 0 || c.pass > c.total) {
      throw Error("trend CSV line " + std::to_string(line_no) +
                  ": need 0 <= pass <= total and total > 0");
    }
    c.fraction = static_cast<double>(c.pass) / static_cast<double>(c.total);
    out.back().years[year] = c;
  }
  return out;
}

nlohmann::json series_to_json(std::span<const TrendSeries> series) {
  auto arr = nlohmann::json::array();
  for (const auto &s : series) {
    auto years = nlohmann::json::array();
    for (const auto &[year, c] : s.years) {
      years.push_back({{"year", year},
                       {"pass", c.pass},
                       {"total", c.total},
                       {"fraction", c.fraction}});
    }
    arr.push_back({{"rule_id", s.rule_id}, {"years", years}});
  }
  return arr;
}

std::vector<TrendSeries> series_from_json(const nlohmann::json &j) {
  if (!j.is_array()) throw Error("trend JSON must be an array of series");
  std::vector<TrendSeries> out;
  for (const auto &s : j) {
    TrendSeries ts;
    ts.rule_id = s.at("rule_id").get<std::string>();
    for (const auto &y : s.at("years")) {
      YearCount c;
      c.pass = y.at("pass").get<std::size_t>();
      c.total = y.at("total").get<std::size_t>();
      if (c.total == 0 || c.pass > c.total) {
        throw Error("trend JSON: need 0 <= pass <= total and total > 0");
      }
      c.fraction = static_cast<double>(c.pass) / static_cast<double>(c.total);
      ts.years[y.at("year").get<int>()] = c;
    }
    out.push_back(std::move(ts));
  }
  return out;
}

}  // namespace stratengine
