#include "stratengine/retrieval.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace stratengine {

RetrievalMode parse_mode(std::string_view text) {
  if (text == "default") return RetrievalMode::semantic_then_categorical;
  if (text == "cat_only") return RetrievalMode::cat_only;
  if (text == "cat_sem_rerank") return RetrievalMode::cat_sem_rerank;
  if (text == "sem_only") return RetrievalMode::sem_only;
  throw Error("unknown retrieval mode '" + std::string(text) +
              "' (expected default, cat_only, cat_sem_rerank or sem_only)");
}

std::string_view to_string(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::semantic_then_categorical: return "default";
    case RetrievalMode::cat_only: return "cat_only";
    case RetrievalMode::cat_sem_rerank: return "cat_sem_rerank";
    case RetrievalMode::sem_only: return "sem_only";
  }
  return "default";
}

std::string fingerprint_corpus_hash(std::span<const StrategyFingerprint> fps) {
  ContentHasher h;
  h.field("fingerprints");
  for (const auto &fp : fps) {
    h.field(fp.route_id);
    h.field(std::to_string(fp.bits.size()));
    h.field(fp.bits.to_hex());
  }
  return h.hex();
}

// --- inverted index ---

InvertedIndex InvertedIndex::build(std::span<const StrategyFingerprint> fps,
                                   const RuleLibrary &library) {
  InvertedIndex idx;
  idx.corpus_hash_ = fingerprint_corpus_hash(fps);
  idx.library_hash_ = library.content_hash();
  idx.postings_.resize(library.size());
  for (const auto &rule : library.rules()) idx.rule_ids_.push_back(rule.rule_id);
  std::set<std::string> seen;
  for (std::size_t r = 0; r < fps.size(); ++r) {
    const auto &fp = fps[r];
    if (fp.bits.size() != library.size()) {
      throw Error("fingerprint for '" + fp.route_id + "' has " +
                  std::to_string(fp.bits.size()) + " bits, library has " +
                  std::to_string(library.size()) + " rules");
    }
    if (!seen.insert(fp.route_id).second) {
      throw Error("duplicate route id '" + fp.route_id + "' in fingerprints");
    }
    idx.route_ids_.push_back(fp.route_id);
    for (std::size_t i = 0; i < library.size(); ++i) {
      if (fp.bits.test(i)) idx.postings_[i].push_back(static_cast<std::uint32_t>(r));
    }
  }
  return idx;
}

bool InvertedIndex::contains(std::size_t rule, std::uint32_t route) const {
  const auto &p = postings_[rule];
  return std::binary_search(p.begin(), p.end(), route);
}

void InvertedIndex::write(std::ostream &out) const {
  out << "#index\tcorpus=" << corpus_hash_ << "\tlibrary=" << library_hash_
      << "\troutes=" << route_ids_.size() << "\trules=" << rule_ids_.size()
      << '\n';
  for (const auto &id : route_ids_) out << "R\t" << id << '\n';
  for (std::size_t i = 0; i < rule_ids_.size(); ++i) {
    out << "P\t" << rule_ids_[i] << '\t';
    for (std::size_t k = 0; k < postings_[i].size(); ++k) {
      if (k) out << ' ';
      out << postings_[i][k];
    }
    out << '\n';
  }
}

InvertedIndex InvertedIndex::read(std::istream &in,
                                  const std::string &expected_corpus_hash,
                                  const std::string &expected_library_hash) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#index\t", 0) != 0) {
    throw Error("index file is missing its '#index' header");
  }
  InvertedIndex idx;
  std::size_t routes = 0, rules = 0;
  for (const auto &field : split(line, '\t')) {
    if (field.rfind("corpus=", 0) == 0) idx.corpus_hash_ = field.substr(7);
    if (field.rfind("library=", 0) == 0) idx.library_hash_ = field.substr(8);
    if (field.rfind("routes=", 0) == 0) routes = std::stoul(field.substr(7));
    if (field.rfind("rules=", 0) == 0) rules = std::stoul(field.substr(6));
  }
  if (!expected_corpus_hash.empty() && idx.corpus_hash_ != expected_corpus_hash) {
    throw Error("index hash mismatch: built for corpus " + idx.corpus_hash_ +
                ", expected " + expected_corpus_hash);
  }
  if (!expected_library_hash.empty() &&
      idx.library_hash_ != expected_library_hash) {
    throw Error("index hash mismatch: built for library " + idx.library_hash_ +
                ", expected " + expected_library_hash);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields[0] == "R" && fields.size() == 2) {
      idx.route_ids_.push_back(fields[1]);
    } else if (fields[0] == "P" && (fields.size() == 2 || fields.size() == 3)) {
      idx.rule_ids_.push_back(fields[1]);
      std::vector<std::uint32_t> posting;
      if (fields.size() == 3) {
        std::istringstream ss(fields[2]);
        std::uint32_t v;
        while (ss >> v) {
          if (v >= routes) {
            throw Error("index line " + std::to_string(line_no) +
                        ": route position out of range");
          }
          posting.push_back(v);
        }
      }
      if (!std::is_sorted(posting.begin(), posting.end())) {
        throw Error("index line " + std::to_string(line_no) +
                    ": posting list not sorted");
      }
      idx.postings_.push_back(std::move(posting));
    } else {
      throw Error("index line " + std::to_string(line_no) + ": malformed record");
    }
  }
  if (idx.route_ids_.size() != routes || idx.rule_ids_.size() != rules) {
    throw Error("index file truncated: header declares " + std::to_string(routes) +
                " routes and " + std::to_string(rules) + " rules");
  }
  return idx;
}

// --- candidates ---

std::vector<Embedding> embed_library(const RuleLibrary &library,
                                     const EmbeddingProvider &provider) {
  std::vector<Embedding> out(library.size());
  std::vector<std::string> texts;
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < library.size(); ++i) {
    if (auto v = provider.lookup(library[i].rule_id)) {
      out[i] = std::move(*v);
    } else {
      texts.push_back(library[i].description);
      pending.push_back(i);
    }
  }
  if (!texts.empty()) {
    auto vecs = provider.embed(texts);
    for (std::size_t k = 0; k < pending.size(); ++k) out[pending[k]] = std::move(vecs[k]);
  }
  return out;
}

namespace {

// Rule positions by descending cosine; ties keep library order.
std::vector<std::size_t> by_similarity(std::vector<std::size_t> rules,
                                       std::span<const Embedding> rule_vectors,
                                       const Embedding &query_vector) {
  std::vector<double> sim(rule_vectors.size(), 0.0);
  for (auto r : rules) sim[r] = cosine(query_vector, rule_vectors[r]);
  std::stable_sort(rules.begin(), rules.end(),
                   [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  return rules;
}

}  // namespace

std::vector<std::size_t> candidate_functions(
    const SubQuery &sub, const RuleLibrary &library,
    std::span<const Embedding> rule_vectors, const Embedding &query_vector,
    RetrievalMode mode, std::size_t top_n) {
  if (library.empty()) throw Error("rule library is empty");
  if (rule_vectors.size() != library.size()) {
    throw Error("rule vectors do not match the library size");
  }
  auto passes = [&](std::size_t r) {
    return library[r].categorical_meta.superset_of(sub.atomic);
  };
  std::vector<std::size_t> all(library.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  switch (mode) {
    case RetrievalMode::cat_only: {
      std::vector<std::size_t> out;
      for (auto r : all) if (passes(r)) out.push_back(r);
      return out;
    }
    case RetrievalMode::cat_sem_rerank: {
      std::vector<std::size_t> out;
      for (auto r : all) if (passes(r)) out.push_back(r);
      return by_similarity(std::move(out), rule_vectors, query_vector);
    }
    case RetrievalMode::sem_only: {
      auto ranked = by_similarity(std::move(all), rule_vectors, query_vector);
      if (ranked.size() > top_n) ranked.resize(top_n);
      return ranked;
    }
    case RetrievalMode::semantic_then_categorical: {
      auto ranked = by_similarity(std::move(all), rule_vectors, query_vector);
      if (ranked.size() > top_n) ranked.resize(top_n);
      std::vector<std::size_t> out;
      for (auto r : ranked) if (passes(r)) out.push_back(r);
      return out;
    }
  }
  return {};
}

// --- search ---

nlohmann::json to_json(const RankedResult &result) {
  nlohmann::json matched = nlohmann::json::object();
  for (const auto &[sub, rules] : result.matched) {
    matched[std::to_string(sub)] = rules;
  }
  return {{"route_id", result.route_id},
          {"match_count", result.match_count},
          {"rank_score", result.rank_score},
          {"matched", matched}};
}

Retriever::Retriever(const RuleLibrary &library, const InvertedIndex &index,
                     const EmbeddingProvider &provider)
    : Retriever(library, index, provider, embed_library(library, provider)) {}

Retriever::Retriever(const RuleLibrary &library, const InvertedIndex &index,
                     const EmbeddingProvider &provider,
                     std::vector<Embedding> rule_vectors)
    : library_(library),
      index_(index),
      provider_(provider),
      rule_vectors_(std::move(rule_vectors)) {
  if (index_.library_hash() != library_.content_hash()) {
    throw Error("index was built against a different rule library (" +
                index_.library_hash() + " vs " + library_.content_hash() + ")");
  }
  if (rule_vectors_.size() != library_.size()) {
    throw Error("rule vectors do not match the library size");
  }
}

std::vector<RankedResult> Retriever::search(const StructuredQuery &query,
                                            RetrievalMode mode,
                                            std::size_t top_n) const {
  if (query.subqueries.empty()) throw Error("query has no sub-queries");
  const std::size_t nsub = query.subqueries.size();
  std::vector<std::string> descriptions;
  for (const auto &s : query.subqueries) descriptions.push_back(s.description);
  auto query_vectors = provider_.embed(descriptions);

  // Per sub-query: candidate rules in library order, with their similarity.
  std::vector<std::vector<std::size_t>> candidates(nsub);
  std::vector<std::unordered_map<std::size_t, double>> similarity(nsub);
  for (std::size_t i = 0; i < nsub; ++i) {
    auto c = candidate_functions(query.subqueries[i], library_, rule_vectors_,
                                 query_vectors[i], mode, top_n);
    std::sort(c.begin(), c.end());
    for (auto r : c) similarity[i][r] = cosine(query_vectors[i], rule_vectors_[r]);
    candidates[i] = std::move(c);
  }

  const std::size_t nroutes = index_.route_ids().size();
  std::vector<char> in_pool(nroutes, 0);
  bool any_positive = false;
  for (std::size_t i = 0; i < nsub; ++i) {
    if (query.subqueries[i].negated) continue;
    any_positive = true;
    for (auto r : candidates[i]) {
      for (auto route : index_.postings(r)) in_pool[route] = 1;
    }
  }
  if (!any_positive) std::fill(in_pool.begin(), in_pool.end(), 1);

  std::vector<RankedResult> results;
  for (std::uint32_t route = 0; route < nroutes; ++route) {
    if (!in_pool[route]) continue;
    RankedResult res;
    res.route_id = index_.route_ids()[route];
    double score_sum = 0.0;
    int scored = 0;
    for (std::size_t i = 0; i < nsub; ++i) {
      std::vector<std::string> hits;
      double sim_sum = 0.0;
      for (auto r : candidates[i]) {
        if (index_.contains(r, route)) {
          hits.push_back(library_[r].rule_id);
          sim_sum += similarity[i].at(r);
        }
      }
      if (query.subqueries[i].negated) {
        if (hits.empty()) {
          ++res.match_count;
          res.matched[i] = {};
        }
      } else if (!hits.empty()) {
        ++res.match_count;
        score_sum += sim_sum / static_cast<double>(hits.size());
        ++scored;
        res.matched[i] = std::move(hits);
      }
    }
    res.rank_score = scored ? score_sum / scored : 0.0;
    bool keep = query.combinator == Combinator::all_of
                    ? res.match_count == static_cast<int>(nsub)
                    : res.match_count >= 1;
    if (keep) results.push_back(std::move(res));
  }
  std::sort(results.begin(), results.end(),
            [](const RankedResult &a, const RankedResult &b) {
              if (a.match_count != b.match_count) return a.match_count > b.match_count;
              if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
              return a.route_id < b.route_id;
            });
  return results;
}

// --- benchmark ---

std::vector<BenchmarkCase> parse_benchmark(std::string_view json_text,
                                           const Vocabularies *vocab) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception &e) {
    throw Error(std::string("malformed benchmark JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("cases") || !j["cases"].is_array()) {
    throw Error("benchmark must be an object with a \"cases\" array");
  }
  if (j["cases"].empty()) throw Error("benchmark has no cases");
  std::vector<BenchmarkCase> cases;
  std::set<std::string> ids;
  for (const auto &c : j["cases"]) {
    if (!c.is_object() || !c.contains("id") || !c["id"].is_string() ||
        !c.contains("query") || !c.contains("ground_truth") ||
        !c["ground_truth"].is_string()) {
      throw Error("benchmark case needs string \"id\", \"query\" and string \"ground_truth\"");
    }
    BenchmarkCase bc;
    bc.case_id = c["id"].get<std::string>();
    if (!ids.insert(bc.case_id).second) {
      throw Error("duplicate benchmark case id '" + bc.case_id + "'");
    }
    try {
      bc.query = query_from_json(c["query"], vocab);
    } catch (const Error &e) {
      throw Error("benchmark case '" + bc.case_id + "': " + e.what());
    }
    bc.ground_truth = c["ground_truth"].get<std::string>();
    cases.push_back(std::move(bc));
  }
  return cases;
}

std::map<int, double> topk_accuracy(std::span<const BenchmarkCase> cases,
                                    const Retriever &retriever,
                                    RetrievalMode mode, std::size_t top_n,
                                    std::span<const int> ks) {
  if (cases.empty()) throw Error("benchmark has no cases");
  std::set<std::string> known(retriever.index().route_ids().begin(),
                              retriever.index().route_ids().end());
  std::string missing;
  for (const auto &c : cases) {
    if (!known.count(c.ground_truth)) {
      missing += (missing.empty() ? "" : ", ") + c.case_id + " (" + c.ground_truth + ")";
    }
  }
  if (!missing.empty()) {
    throw Error("ground truth not in corpus for cases: " + missing);
  }
  std::vector<std::size_t> ranks(cases.size());
  parallel_for(cases.size(), [&](std::size_t i) {
    auto results = retriever.search(cases[i].query, mode, top_n);
    std::size_t rank = results.size() + 1;
    for (std::size_t k = 0; k < results.size(); ++k) {
      if (results[k].route_id == cases[i].ground_truth) {
        rank = k + 1;
        break;
      }
    }
    ranks[i] = rank;
  });
  std::map<int, double> acc;
  for (int k : ks) {
    if (k < 1) throw Error("top-K values must be >= 1");
    std::size_t hits = 0;
    for (auto r : ranks) hits += r <= static_cast<std::size_t>(k);
    acc[k] = static_cast<double>(hits) / static_cast<double>(cases.size());
  }
  return acc;
}

}  // namespace stratengine
