#include "stratengine/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "stratengine/annotations.hpp"
#include "stratengine/clustering.hpp"
#include "stratengine/embedding.hpp"
#include "stratengine/fingerprint.hpp"
#include "stratengine/retrieval.hpp"
#include "stratengine/route.hpp"
#include "stratengine/strategy.hpp"
#include "stratengine/tree_edit_distance.hpp"
#include "stratengine/trends.hpp"

namespace stratengine::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string corpus;
  std::string library;
  std::string annotations;
  std::string embeddings;
  std::string fingerprints;
  std::string mode = "default";
  std::size_t top_n = kDefaultTopN;
  bool top_n_set = false;
  std::uint64_t seed = 0;
  int k_min = 2;
  int k_max = 14;
  double threshold = 0.40;
  std::string out;
  std::string format;

  std::string input;  // positional file for ingest / bench
  std::string query;
  std::size_t top_k = 10;
  std::string method = "strategy";
  std::string linkage = "average";
  bool per_target = false;
  std::vector<std::string> rule_ids;
  std::vector<std::string> modes;
  std::vector<int> ks;
  int embed_timeout_ms = 10000;
  int embed_retries = 2;
};

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_path(const std::string &value, const char *flag) {
  if (value.empty()) throw Error(std::string("missing required option ") + flag);
  if (!fs::exists(value)) throw Error(std::string(flag) + ": '" + value + "' does not exist");
}

// Writes to --out when given, otherwise to the command's stdout.
class Sink {
 public:
  Sink(const std::string &path, std::ostream &fallback) : path_(path), out_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error("cannot write '" + path + "'");
      out_ = &file_;
    }
  }
  std::ostream &stream() { return *out_; }
  void finish() {
    out_->flush();
    if (!*out_) throw Error("write failed" + (path_.empty() ? "" : " for '" + path_ + "'"));
  }

 private:
  std::string path_;
  std::ofstream file_;
  std::ostream *out_;
};

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// --- content-addressed cache ---

std::optional<fs::path> cache_file(const std::string &kind, const std::string &key) {
  const char *dir = std::getenv("STRATENGINE_CACHE_DIR");
  if (!dir || !*dir) return std::nullopt;
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) return std::nullopt;
  return p / (kind + "-" + key);
}

void atomic_write(const fs::path &path, const std::string &bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return;
    out << bytes;
    if (!out) return;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
}

// --- shared loading ---

struct Workspace {
  const Options &opt;
  std::ostream &err;
  std::optional<AnnotationStore> store;
  std::optional<RuleLibrary> library;
  std::optional<Corpus> corpus;
  std::optional<std::string> corpus_digest;
  std::optional<std::vector<StrategyFingerprint>> fps;

  Workspace(const Options &o, std::ostream &e) : opt(o), err(e) {}

  const AnnotationStore &annotations() {
    if (!store) {
      require_path(opt.annotations, "--annotations");
      store = AnnotationStore::load(opt.annotations);
    }
    return *store;
  }
  const RuleLibrary &rules() {
    if (!library) {
      require_path(opt.library, "--library");
      library = RuleLibrary::load(opt.library, &annotations().vocabularies());
      if (library->empty()) throw Error("rule library '" + opt.library + "' is empty");
    }
    return *library;
  }
  const Corpus &routes() {
    if (!corpus) {
      require_path(opt.corpus, "--corpus");
      corpus = load_corpus(opt.corpus);
      corpus_digest = corpus_hash(*corpus);
    }
    return *corpus;
  }

  const std::vector<StrategyFingerprint> &fingerprints() {
    if (fps) return *fps;
    if (!opt.fingerprints.empty() && opt.corpus.empty()) {
      require_path(opt.fingerprints, "--fingerprints");
      auto set = load_fingerprints(opt.fingerprints);
      if (!opt.library.empty()) rules();
      if (library && set.library_hash != library->content_hash()) {
        throw Error("fingerprints were computed with a different rule library");
      }
      fps = std::move(set.fingerprints);
      return *fps;
    }
    const auto &c = routes();
    const auto &lib = rules();
    const auto &st = annotations();
    ContentHasher key;
    key.field(*corpus_digest).field(lib.content_hash()).field(st.content_hash());
    auto path = cache_file("fingerprints", key.hex() + ".tsv");
    if (path && fs::exists(*path)) {
      try {
        auto set = load_fingerprints(path->string());
        bool ok = set.library_hash == lib.content_hash() &&
                  set.bit_count == lib.size() &&
                  set.fingerprints.size() == c.routes.size();
        for (std::size_t i = 0; ok && i < c.routes.size(); ++i) {
          ok = set.fingerprints[i].route_id == c.routes[i].route_id;
        }
        if (ok) {
          fps = std::move(set.fingerprints);
          return *fps;
        }
      } catch (const Error &) {
        // stale or corrupt entry: recompute below
      }
    }
    EvalDiagnostics diag;
    fps = evaluate_corpus(lib, c.routes, st, &diag);
    for (const auto &f : diag.failures) {
      err << "warning: rule '" << f.rule_id << "' failed on route '" << f.route_id
          << "': " << f.message << '\n';
    }
    if (diag.missing_annotations) {
      err << "warning: " << diag.missing_annotations
          << " annotation lookups had no record (treated as false)\n";
    }
    if (path) {
      std::ostringstream ss;
      write_fingerprints(ss, FingerprintSet{lib.size(), lib.content_hash(), *fps});
      atomic_write(*path, ss.str());
    }
    return *fps;
  }

  InvertedIndex index() {
    const auto &f = fingerprints();
    const auto &lib = rules();
    auto fp_hash = fingerprint_corpus_hash(f);
    ContentHasher key;
    key.field(fp_hash).field(lib.content_hash());
    auto path = cache_file("index", key.hex() + ".tsv");
    if (path && fs::exists(*path)) {
      try {
        std::ifstream in(*path);
        auto idx = InvertedIndex::read(in, fp_hash, lib.content_hash());
        if (idx.rule_ids().size() == lib.size()) return idx;
      } catch (const Error &) {
      }
    }
    auto idx = InvertedIndex::build(f, lib);
    if (path) {
      std::ostringstream ss;
      idx.write(ss);
      atomic_write(*path, ss.str());
    }
    return idx;
  }

  std::unique_ptr<EmbeddingProvider> provider() const {
    const auto &e = opt.embeddings;
    if (e.empty()) return std::make_unique<HashingEmbedder>();
    if (e.rfind("http://", 0) == 0 || e.rfind("https://", 0) == 0) {
      RemoteEmbeddingOptions ro;
      ro.url = e;
      ro.timeout = std::chrono::milliseconds(opt.embed_timeout_ms);
      ro.retries = opt.embed_retries;
      return std::make_unique<RemoteEmbeddingProvider>(ro);
    }
    require_path(e, "--embeddings");
    return std::make_unique<VectorFileProvider>(VectorFileProvider::load(e));
  }
};

// --- TED matrix cache ("SEDM" binary) ---

DistanceMatrix cached_ted_matrix(std::span<const RouteTree> routes,
                                 const AnnotationStore *store) {
  ContentHasher key;
  key.field("ted");
  for (const auto &r : routes) key.field(subtree_signature(canonicalize(r).root));
  key.field(store ? store->content_hash() : "-");
  auto path = cache_file("ted", key.hex() + ".bin");
  const std::uint64_t n = routes.size();
  if (path && fs::exists(*path)) {
    std::ifstream in(*path, std::ios::binary);
    char magic[4];
    std::uint64_t stored_n = 0, stored_key = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char *>(&stored_n), sizeof stored_n);
    in.read(reinterpret_cast<char *>(&stored_key), sizeof stored_key);
    if (in && std::memcmp(magic, "SEDM", 4) == 0 && stored_n == n &&
        stored_key == key.digest()) {
      std::vector<double> data(n * n);
      in.read(reinterpret_cast<char *>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
      if (in) {
        DistanceMatrix m(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) m.set_raw(i, j, data[i * n + j]);
        return m;
      }
    }
  }
  auto m = ted_matrix(routes, store);
  if (path) {
    std::string bytes("SEDM");
    auto digest = key.digest();
    bytes.append(reinterpret_cast<const char *>(&n), sizeof n);
    bytes.append(reinterpret_cast<const char *>(&digest), sizeof digest);
    bytes.append(reinterpret_cast<const char *>(m.data().data()),
                 m.data().size() * sizeof(double));
    atomic_write(*path, bytes);
  }
  return m;
}

// --- commands ---

int cmd_ingest(const Options &opt, std::ostream &out, std::ostream &err) {
  require_path(opt.input, "reactions TSV");
  std::ifstream in(opt.input);
  if (!in) throw Error("cannot open '" + opt.input + "'");
  auto records = read_reaction_tsv(in);
  auto roots = terminal_products(records);
  Corpus corpus;
  corpus.direction = Direction::forward;
  std::size_t unproduced = 0;
  for (auto &ex : extract_routes(records, roots)) {
    if (!ex.root_produced) {
      ++unproduced;
      continue;
    }
    corpus.routes.push_back(canonicalize(ex.route));
  }
  if (unproduced) err << "warning: " << unproduced << " roots had no producing reaction\n";
  Sink sink(opt.out, out);
  write_corpus(sink.stream(), corpus);
  sink.finish();
  return 0;
}

int cmd_eval(const Options &opt, std::ostream &out, std::ostream &err) {
  Workspace ws(opt, err);
  const auto &fps = ws.fingerprints();
  Sink sink(opt.out, out);
  write_fingerprints(sink.stream(),
                     FingerprintSet{ws.rules().size(), ws.rules().content_hash(), fps});
  sink.finish();
  return 0;
}

struct ClusterOutcome {
  std::string target;
  ClusterResult result;
};

std::size_t distinct_fingerprints(std::span<const StrategyFingerprint> fps) {
  std::set<std::string> s;
  for (const auto &f : fps) s.insert(f.bits.to_hex());
  return s.size();
}

std::size_t distinct_routes(std::span<const RouteTree> routes) {
  std::set<std::string> s;
  for (const auto &r : routes) s.insert(subtree_signature(canonicalize(r).root));
  return s.size();
}

void print_cluster(std::ostream &os, const ClusterResult &res,
                   const DistinctivenessTable *table) {
  os << "k\t" << res.k << '\n';
  os << "silhouette\t" << (res.silhouette ? fmt("%.6f", *res.silhouette) : "nan") << '\n';
  auto sizes = res.sizes();
  for (int c = 0; c < res.k; ++c) {
    os << "cluster\t" << c << "\tsize=" << sizes[static_cast<std::size_t>(c)];
    if (table) {
      os << "\ttop=";
      bool first = true;
      for (const auto &[rule, score] : table->top(c, 5)) {
        os << (first ? "" : ",") << rule << ':' << fmt("%+.3f", score);
        first = false;
      }
    }
    os << '\n';
  }
  for (std::size_t i = 0; i < res.route_ids.size(); ++i) {
    os << "assign\t" << res.route_ids[i] << '\t' << res.labels[i] << '\n';
  }
}

nlohmann::json cluster_json(const ClusterResult &res, const DistinctivenessTable *table) {
  nlohmann::json j;
  j["k"] = res.k;
  j["silhouette"] = res.silhouette ? nlohmann::json(*res.silhouette) : nlohmann::json();
  j["sizes"] = res.sizes();
  nlohmann::json assign = nlohmann::json::object();
  for (std::size_t i = 0; i < res.route_ids.size(); ++i) assign[res.route_ids[i]] = res.labels[i];
  j["assignments"] = assign;
  if (table) {
    auto tops = nlohmann::json::array();
    for (int c = 0; c < res.k; ++c) {
      auto row = nlohmann::json::array();
      for (const auto &[rule, score] : table->top(c, 5)) row.push_back({{"rule_id", rule}, {"score", score}});
      tops.push_back(row);
    }
    j["distinctive_rules"] = tops;
  }
  return j;
}

int cmd_cluster(const Options &opt, std::ostream &out, std::ostream &err) {
  if (opt.method != "strategy" && opt.method != "ted") {
    throw Error("unknown clustering method '" + opt.method + "' (strategy|ted)");
  }
  const bool json = opt.format == "json";
  if (!opt.format.empty() && opt.format != "json" && opt.format != "table") {
    throw Error("unknown format '" + opt.format + "' (table|json)");
  }
  Workspace ws(opt, err);
  const bool strategy = opt.method == "strategy";
  Linkage linkage = parse_linkage(opt.linkage);

  // Groups of route positions: everything, or one per target molecule.
  std::vector<std::string> route_ids;
  std::vector<std::string> targets;
  std::vector<const RouteTree *> trees;
  if (strategy) {
    const auto &fps = ws.fingerprints();
    for (const auto &f : fps) route_ids.push_back(f.route_id);
    if (!opt.corpus.empty()) {
      for (const auto &r : ws.routes().routes) targets.push_back(r.root.smiles);
    }
    if (opt.per_target && targets.empty()) {
      throw Error("--per-target needs --corpus to know each route's target");
    }
  } else {
    for (const auto &r : ws.routes().routes) {
      route_ids.push_back(r.route_id);
      targets.push_back(r.root.smiles);
      trees.push_back(&r);
    }
  }
  if (route_ids.size() < 2) throw Error("need >= 2 routes to cluster, got " + std::to_string(route_ids.size()));

  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::string> group_names;
  if (opt.per_target) {
    std::map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      auto [it, fresh] = where.emplace(targets[i], groups.size());
      if (fresh) {
        groups.emplace_back();
        group_names.push_back(targets[i]);
      }
      groups[it->second].push_back(i);
    }
  } else {
    groups.emplace_back(route_ids.size());
    for (std::size_t i = 0; i < route_ids.size(); ++i) groups[0][i] = i;
    group_names.push_back("*");
  }

  const AnnotationStore *tag_store = nullptr;
  if (!strategy && !opt.annotations.empty()) tag_store = &ws.annotations();

  std::vector<ClusterOutcome> outcomes;
  std::vector<DistinctivenessTable> tables;
  std::vector<std::string> skipped;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto &members = groups[g];
    const int n = static_cast<int>(members.size());
    const int k_max = std::min(opt.k_max, n - 1);
    auto skip_or_throw = [&](const std::string &why) {
      if (!opt.per_target) throw Error(why);
      skipped.push_back(group_names[g] + " (" + why + ")");
    };
    if (n < 2) {
      skip_or_throw("need >= 2 routes to cluster, got " + std::to_string(n));
      continue;
    }
    if (opt.k_min > k_max) {
      skip_or_throw("k range [" + std::to_string(opt.k_min) + ", " +
                    std::to_string(k_max) + "] is empty for " + std::to_string(n) + " routes");
      continue;
    }
    ClusterResult res;
    if (strategy) {
      std::vector<StrategyFingerprint> sub;
      for (auto i : members) sub.push_back(ws.fingerprints()[i]);
      if (distinct_fingerprints(sub) < 2) {
        skip_or_throw("cannot select k: fewer than 2 distinct fingerprints");
        continue;
      }
      res = select_k(sub, opt.k_min, k_max, opt.seed);
      tables.push_back(distinctiveness(sub, res.labels, ws.rules()));
    } else {
      std::vector<RouteTree> sub;
      for (auto i : members) sub.push_back(*trees[i]);
      if (distinct_routes(sub) < 2) {
        skip_or_throw("cannot select k: fewer than 2 distinct routes");
        continue;
      }
      auto dist = cached_ted_matrix(sub, tag_store);
      res = select_k_agglomerative(dist, linkage, opt.k_min, k_max);
      for (std::size_t i = 0; i < members.size(); ++i) res.route_ids[i] = sub[i].route_id;
    }
    outcomes.push_back({group_names[g], std::move(res)});
  }
  if (outcomes.empty()) throw Error("no target had enough distinct routes to cluster");

  Sink sink(opt.out, out);
  auto &os = sink.stream();
  std::vector<ClusterResult> results;
  for (const auto &o : outcomes) results.push_back(o.result);
  if (json) {
    nlohmann::json j;
    j["method"] = opt.method;
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      auto c = cluster_json(outcomes[i].result, strategy ? &tables[i] : nullptr);
      c["target"] = outcomes[i].target;
      arr.push_back(c);
    }
    j["clusterings"] = arr;
    j["skipped"] = skipped;
    if (opt.per_target) {
      auto b = balance_stats(results);
      j["balance"] = {{"mean_size_stddev", b.mean_size_stddev},
                      {"mean_k", b.mean_k},
                      {"size_stddevs", b.size_stddevs}};
    }
    os << j.dump(2) << '\n';
  } else {
    os << "method\t" << opt.method << '\n';
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (opt.per_target) os << "target\t" << outcomes[i].target << '\n';
      print_cluster(os, outcomes[i].result, strategy ? &tables[i] : nullptr);
    }
    for (const auto &s : skipped) os << "skipped\t" << s << '\n';
    if (opt.per_target) {
      auto b = balance_stats(results);
      os << "balance\tmean_size_stddev=" << fmt("%.6f", b.mean_size_stddev)
         << "\tmean_k=" << fmt("%.6f", b.mean_k) << '\n';
      for (const auto &[k, count] : b.k_histogram) os << "k_histogram\t" << k << '\t' << count << '\n';
    }
  }
  sink.finish();
  return 0;
}

std::string matched_text(const RankedResult &r) {
  std::string s;
  for (const auto &[sub, rules] : r.matched) {
    if (!s.empty()) s += ' ';
    s += std::to_string(sub) + ':';
    if (rules.empty()) s += '!';
    for (std::size_t i = 0; i < rules.size(); ++i) s += (i ? "," : "") + rules[i];
  }
  return s.empty() ? "-" : s;
}

int cmd_search(const Options &opt, std::ostream &out, std::ostream &err) {
  auto mode = parse_mode(opt.mode);
  if (!opt.format.empty() && opt.format != "table" && opt.format != "jsonl") {
    throw Error("unknown format '" + opt.format + "' (table|jsonl)");
  }
  require_path(opt.query, "--query");
  Workspace ws(opt, err);
  auto query = parse_query(read_file(opt.query), &ws.annotations().vocabularies());
  auto index = ws.index();
  auto provider = ws.provider();
  Retriever retriever(ws.rules(), index, *provider);
  auto results = retriever.search(query, mode, opt.top_n);
  if (results.size() > opt.top_k) results.resize(opt.top_k);

  Sink sink(opt.out, out);
  auto &os = sink.stream();
  if (opt.format == "jsonl") {
    for (const auto &r : results) os << to_json(r).dump() << '\n';
  } else {
    os << "rank\troute_id\tmatch_count\trank_score\tmatched\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      os << i + 1 << '\t' << results[i].route_id << '\t' << results[i].match_count
         << '\t' << fmt("%.6f", results[i].rank_score) << '\t' << matched_text(results[i])
         << '\n';
    }
  }
  sink.finish();
  return 0;
}

const std::vector<std::size_t> kBenchGrid = {1, 3, 5, 10, 15, 20, 25, 30,
                                             40, 50, 75, 100, 150, 200, 250};

int cmd_bench(const Options &opt, std::ostream &out, std::ostream &err) {
  require_path(opt.input, "benchmark JSON");
  std::vector<RetrievalMode> modes;
  if (opt.modes.empty()) {
    modes = {RetrievalMode::semantic_then_categorical, RetrievalMode::cat_only,
             RetrievalMode::cat_sem_rerank, RetrievalMode::sem_only};
  } else {
    for (const auto &m : opt.modes) modes.push_back(parse_mode(m));
  }
  std::vector<int> ks = opt.ks.empty() ? kDefaultTopK : opt.ks;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::vector<std::size_t> grid = opt.top_n_set ? std::vector<std::size_t>{opt.top_n} : kBenchGrid;

  Workspace ws(opt, err);
  auto cases = parse_benchmark(read_file(opt.input), &ws.annotations().vocabularies());
  auto index = ws.index();
  auto provider = ws.provider();
  Retriever retriever(ws.rules(), index, *provider);

  Sink sink(opt.out, out);
  auto &os = sink.stream();
  os << "mode,top_n";
  for (int k : ks) os << ",top_" << k;
  os << '\n';
  for (auto mode : modes) {
    for (auto n : grid) {
      auto acc = topk_accuracy(cases, retriever, mode, n, ks);
      os << to_string(mode) << ',' << n;
      for (int k : ks) os << ',' << fmt("%.2f", 100.0 * acc.at(k));
      os << '\n';
    }
  }
  sink.finish();
  return 0;
}

int cmd_trends(const Options &opt, std::ostream &out, std::ostream &err) {
  if (!opt.format.empty() && opt.format != "csv" && opt.format != "json") {
    throw Error("unknown format '" + opt.format + "' (csv|json)");
  }
  Workspace ws(opt, err);
  const auto &fps = ws.fingerprints();
  const auto &routes = ws.routes().routes;
  std::vector<DatedFingerprint> dated;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    dated.push_back({routes[i].route_id, routes[i].year, fps[i].bits});
  }
  std::vector<std::string> ids = opt.rule_ids;
  if (ids.empty()) {
    for (const auto &r : ws.rules().rules()) ids.push_back(r.rule_id);
  }
  TrendDiagnostics diag;
  auto series = yearly_fractions(dated, ws.rules(), ids, &diag);
  if (!diag.undated_routes.empty()) {
    err << "warning: " << diag.undated_routes.size() << " routes without a year were excluded\n";
  }
  Sink sink(opt.out, out);
  if (opt.format == "json") {
    sink.stream() << series_to_json(series).dump(2) << '\n';
  } else {
    write_series_csv(sink.stream(), series);
  }
  sink.finish();
  return 0;
}

int cmd_validate(const Options &opt, std::ostream &out, std::ostream &err) {
  require_path(opt.annotations, "--annotations");
  require_path(opt.library, "--library");
  auto store = AnnotationStore::load(opt.annotations);
  // Parse without the vocabulary so every unknown label gets reported.
  auto library = RuleLibrary::load(opt.library);
  auto report = validate_library(library, store.vocabularies());
  for (const auto &u : report.unknown_labels) {
    out << "unknown_label\t" << u.rule_id << '\t' << to_string(u.kind) << '\t' << u.label << '\n';
  }
  for (const auto &d : report.duplicate_ids) out << "duplicate_id\t" << d << '\n';
  for (const auto &t : report.purely_topological) out << "purely_topological\t" << t << '\n';
  out << "rules\t" << library.size() << '\n';
  if (!report.unknown_labels.empty() || !report.duplicate_ids.empty()) {
    err << "error: library has " << report.unknown_labels.size() << " unknown labels and "
        << report.duplicate_ids.size() << " duplicate ids\n";
    return 1;
  }
  return 0;
}

int cmd_screen(const Options &opt, std::ostream &out, std::ostream &err) {
  if (!(opt.threshold >= 0.0 && opt.threshold <= 1.0)) {
    throw Error("--threshold must be a fraction in [0, 1]");
  }
  Workspace ws(opt, err);
  const auto &fps = ws.fingerprints();
  auto rates = pass_rates(ws.rules(), fps);
  auto kept = prevalence_filter(ws.rules(), fps, opt.threshold);
  Sink sink(opt.out, out);
  auto &os = sink.stream();
  os << "rule_id\tpass_rate\tstatus\n";
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const auto &id = ws.rules()[i].rule_id;
    os << id << '\t' << fmt("%.6f", rates[i]) << '\t'
       << (kept.index_of(id) ? "kept" : "dropped") << '\n';
  }
  sink.finish();
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  Options opt;
  CLI::App app{"Strategy evaluation, clustering and retrieval over synthesis routes", "stratengine"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto add_common = [&](CLI::App *cmd, bool data) {
    if (data) {
      cmd->add_option("--corpus", opt.corpus, "route corpus (NDJSON)");
      cmd->add_option("--library", opt.library, "rule library directory");
      cmd->add_option("--annotations", opt.annotations, "annotation TSV");
      cmd->add_option("--fingerprints", opt.fingerprints, "precomputed fingerprint dump");
    }
    cmd->add_option("--out", opt.out, "output file (default stdout)");
  };

  auto *ingest = app.add_subcommand("ingest", "build a route corpus from a reaction TSV");
  ingest->add_option("reactions", opt.input, "reaction TSV (reaction_smiles, year, patent_id)")->required();
  add_common(ingest, false);

  auto *eval = app.add_subcommand("eval", "evaluate the rule library on every route");
  add_common(eval, true);

  auto *cluster = app.add_subcommand("cluster", "cluster routes by strategy fingerprint or tree edit distance");
  add_common(cluster, true);
  cluster->add_option("--method", opt.method, "strategy|ted")->capture_default_str();
  cluster->add_option("--linkage", opt.linkage, "single|complete|average (ted)")->capture_default_str();
  cluster->add_option("--k-min", opt.k_min)->capture_default_str();
  cluster->add_option("--k-max", opt.k_max)->capture_default_str();
  cluster->add_option("--seed", opt.seed)->capture_default_str();
  cluster->add_flag("--per-target", opt.per_target, "cluster each target molecule separately");
  cluster->add_option("--format", opt.format, "table|json");

  auto add_retrieval = [&](CLI::App *cmd) {
    cmd->add_option("--embeddings", opt.embeddings, "vector file or http(s):// embedding service");
    cmd->add_option("--embed-timeout-ms", opt.embed_timeout_ms)->capture_default_str();
    cmd->add_option("--embed-retries", opt.embed_retries)->capture_default_str();
    cmd->add_option("--top-n", opt.top_n, "semantic pre-filter size")->capture_default_str();
  };

  auto *search = app.add_subcommand("search", "rank routes for a structured query");
  add_common(search, true);
  add_retrieval(search);
  search->add_option("--query", opt.query, "query JSON")->required();
  search->add_option("--mode", opt.mode, "default|cat_only|cat_sem_rerank|sem_only")->capture_default_str();
  search->add_option("--top-k", opt.top_k, "results to print")->capture_default_str();
  search->add_option("--format", opt.format, "table|jsonl");

  auto *bench = app.add_subcommand("bench", "Top-K accuracy over retrieval modes and top-n values");
  add_common(bench, true);
  add_retrieval(bench);
  bench->add_option("benchmark", opt.input, "benchmark JSON")->required();
  bench->add_option("--mode", opt.modes, "restrict to these modes");
  bench->add_option("--top-k", opt.ks, "K values (default 1 3 5 10)");

  auto *trends = app.add_subcommand("trends", "per-year pass fractions of rules");
  add_common(trends, true);
  trends->add_option("--rules", opt.rule_ids, "rule ids (default: all)")->delimiter(',');
  trends->add_option("--format", opt.format, "csv|json");

  auto *validate = app.add_subcommand("validate", "check a rule library against the annotation vocabularies");
  add_common(validate, true);

  auto *screen = app.add_subcommand("screen", "report per-rule pass rates and the prevalence filter");
  add_common(screen, true);
  screen->add_option("--threshold", opt.threshold, "maximum pass rate kept")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 2;
  }
  for (auto *cmd : {search, bench}) {
    if (cmd->parsed() && cmd->count("--top-n")) opt.top_n_set = true;
  }
  if (opt.top_n_set && opt.top_n == 0) {
    err << "error: --top-n must be at least 1\n";
    return 2;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(opt, out, err);
    if (eval->parsed()) return cmd_eval(opt, out, err);
    if (cluster->parsed()) return cmd_cluster(opt, out, err);
    if (search->parsed()) return cmd_search(opt, out, err);
    if (bench->parsed()) return cmd_bench(opt, out, err);
    if (trends->parsed()) return cmd_trends(opt, out, err);
    if (validate->parsed()) return cmd_validate(opt, out, err);
    if (screen->parsed()) return cmd_screen(opt, out, err);
  } catch (const std::exception &e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 2;
}

}  // namespace stratengine::cli
