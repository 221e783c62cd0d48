#pragma once

// Text embedding providers. Every provider returns unit-norm vectors, so
// cosine similarity is a dot product.

#include <chrono>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratengine/common.hpp"

namespace stratengine {

using Embedding = std::vector<float>;

// Accumulated in double, in index order.
double cosine(const Embedding &a, const Embedding &b);
Embedding normalized(Embedding v);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<Embedding> embed(
      std::span<const std::string> texts) const = 0;
  // Vector stored under an id (e.g. a rule id), if the provider has one.
  virtual std::optional<Embedding> lookup(const std::string &) const {
    return std::nullopt;
  }

  Embedding embed_one(const std::string &text) const;
};

// Feature-hashed token counts. Deterministic and offline.
class HashingEmbedder : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dimension = 384) : dim_(dimension) {}

  std::string name() const override { return "hashing-" + std::to_string(dim_); }
  std::size_t dimension() const override { return dim_; }
  std::vector<Embedding> embed(
      std::span<const std::string> texts) const override;

  static std::vector<std::string> tokenize(const std::string &text);

 private:
  std::size_t dim_;
};

// Precomputed vectors keyed by id or by literal text. Unknown texts are an
// error; there is no silent fallback.
//   #embeddings<TAB>provider=NAME<TAB>dim=D
//   key<TAB>v1 v2 ... vD
class VectorFileProvider : public EmbeddingProvider {
 public:
  VectorFileProvider(std::string name, std::size_t dimension)
      : name_(std::move(name)), dim_(dimension) {}

  static VectorFileProvider load(const std::string &path);
  static VectorFileProvider read(std::istream &in);
  void write(std::ostream &out) const;

  void add(const std::string &key, Embedding v);

  std::string name() const override { return name_; }
  std::size_t dimension() const override { return dim_; }
  std::vector<Embedding> embed(
      std::span<const std::string> texts) const override;
  std::optional<Embedding> lookup(const std::string &key) const override;

 private:
  std::string name_;
  std::size_t dim_;
  std::map<std::string, Embedding> vectors_;
};

// POST {"texts": [...]} -> {"vectors": [[...], ...]}.
struct RemoteEmbeddingOptions {
  std::string url;  // http://host:port/path
  std::chrono::milliseconds timeout{10000};
  int retries = 2;
  std::string name = "remote";
  std::size_t dimension = 0;  // 0: accept the first response's dimension
};

class RemoteEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteEmbeddingOptions options);

  std::string name() const override { return options_.name; }
  std::size_t dimension() const override { return dim_; }
  std::vector<Embedding> embed(
      std::span<const std::string> texts) const override;

 private:
  RemoteEmbeddingOptions options_;
  std::string scheme_host_port_;
  std::string path_;
  mutable std::size_t dim_;
};

}  // namespace stratengine
