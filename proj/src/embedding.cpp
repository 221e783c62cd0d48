#include "stratengine/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace stratengine {

double cosine(const Embedding &a, const Embedding &b) {
  if (a.size() != b.size()) {
    throw Error("embedding dimensions differ (" + std::to_string(a.size()) +
                " vs " + std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

Embedding normalized(Embedding v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (auto &x : v) x = static_cast<float>(x / norm);
  }
  return v;
}

Embedding EmbeddingProvider::embed_one(const std::string &text) const {
  std::vector<std::string> one{text};
  auto out = embed(one);
  return std::move(out.at(0));
}

std::vector<std::string> HashingEmbedder::tokenize(const std::string &text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<Embedding> HashingEmbedder::embed(
    std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto &text : texts) {
    Embedding v(dim_, 0.0f);
    for (const auto &tok : tokenize(text)) {
      v[hash_bytes(tok) % dim_] += 1.0f;
    }
    out.push_back(normalized(std::move(v)));
  }
  return out;
}

// --- vector files ---

namespace {

std::string format_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

}  // namespace

void VectorFileProvider::add(const std::string &key, Embedding v) {
  if (key.empty() || key.find('\t') != std::string::npos ||
      key.find('\n') != std::string::npos) {
    throw Error("embedding key must be non-empty and free of tabs/newlines");
  }
  if (v.size() != dim_) {
    throw Error("embedding for '" + key + "' has dimension " +
                std::to_string(v.size()) + ", header declares " +
                std::to_string(dim_));
  }
  vectors_[key] = normalized(std::move(v));
}

VectorFileProvider VectorFileProvider::read(std::istream &in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#embeddings\t", 0) != 0) {
    throw Error("vector file is missing its '#embeddings' header");
  }
  std::string name;
  std::size_t dim = 0;
  for (const auto &field : split(line, '\t')) {
    if (field.rfind("provider=", 0) == 0) name = field.substr(9);
    if (field.rfind("dim=", 0) == 0) dim = std::stoul(field.substr(4));
  }
  if (name.empty() || dim == 0) {
    throw Error("vector file header needs provider= and dim=");
  }
  VectorFileProvider provider(name, dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error("vector file line " + std::to_string(line_no) +
                  ": expected key<TAB>values");
    }
    Embedding v;
    std::istringstream values(line.substr(tab + 1));
    float x;
    while (values >> x) v.push_back(x);
    if (!values.eof()) {
      throw Error("vector file line " + std::to_string(line_no) +
                  ": non-numeric value");
    }
    try {
      provider.add(line.substr(0, tab), std::move(v));
    } catch (const Error &e) {
      throw Error("vector file line " + std::to_string(line_no) + ": " +
                  e.what());
    }
  }
  return provider;
}

VectorFileProvider VectorFileProvider::load(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vector file '" + path + "'");
  return read(in);
}

void VectorFileProvider::write(std::ostream &out) const {
  out << "#embeddings\tprovider=" << name_ << "\tdim=" << dim_ << '\n';
  for (const auto &[key, v] : vectors_) {
    out << key << '\t';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << ' ';
      out << format_float(v[i]);
    }
    out << '\n';
  }
}

std::vector<Embedding> VectorFileProvider::embed(
    std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto &t : texts) {
    auto it = vectors_.find(t);
    if (it == vectors_.end()) {
      throw Error("vector file '" + name_ + "' has no vector for text '" + t +
                  "'");
    }
    out.push_back(it->second);
  }
  return out;
}

std::optional<Embedding> VectorFileProvider::lookup(
    const std::string &key) const {
  auto it = vectors_.find(key);
  if (it == vectors_.end()) return std::nullopt;
  return it->second;
}

// --- remote service ---

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingOptions options)
    : options_(std::move(options)), dim_(options_.dimension) {
  const auto &url = options_.url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error("embedding service url must look like http://host:port/path");
  }
  if (url.substr(0, scheme_end) != "http") {
    throw Error("embedding service url scheme '" + url.substr(0, scheme_end) +
                "' is not supported (built without TLS; use http://)");
  }
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::vector<Embedding> RemoteEmbeddingProvider::embed(
    std::span<const std::string> texts) const {
  nlohmann::json request = {{"texts", nlohmann::json::array()}};
  for (const auto &t : texts) request["texts"].push_back(t);
  const std::string body = request.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    httplib::Client client(scheme_host_port_);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
        options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "service returned HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error("embedding service returned HTTP " +
                  std::to_string(res->status));
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception &e) {
      throw Error(std::string("embedding service sent malformed JSON: ") +
                  e.what());
    }
    if (!reply.contains("vectors") || !reply["vectors"].is_array() ||
        reply["vectors"].size() != texts.size()) {
      throw Error("embedding service reply lacks one vector per text");
    }
    std::vector<Embedding> out;
    for (const auto &row : reply["vectors"]) {
      Embedding v = row.get<Embedding>();
      if (dim_ == 0) dim_ = v.size();
      if (v.size() != dim_) {
        throw Error("embedding service vector has dimension " +
                    std::to_string(v.size()) + ", expected " +
                    std::to_string(dim_));
      }
      out.push_back(normalized(std::move(v)));
    }
    return out;
  }
  throw Error("embedding service unavailable after " +
              std::to_string(options_.retries + 1) + " attempts: " + last_error);
}

}  // namespace stratengine
