#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace stratengine {

// Base for every error raised by the engine; what() is a single line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a checker or rule references a label outside the vocabulary.
class UnknownLabelError : public Error {
 public:
  UnknownLabelError(std::string kind, std::string label)
      : Error("unknown " + kind + " label '" + label + "'"),
        kind_(std::move(kind)),
        label_(std::move(label)) {}
  const std::string &kind() const { return kind_; }
  const std::string &label() const { return label_; }

 private:
  std::string kind_;
  std::string label_;
};

// 64-bit FNV-1a. Used for content addressing of corpora, libraries and
// caches; not a cryptographic hash.
class ContentHasher {
 public:
  ContentHasher &update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  // Length-prefixed so that ("ab","c") and ("a","bc") hash differently.
  ContentHasher &field(std::string_view bytes) {
    update(std::to_string(bytes.size()));
    update(":");
    return update(bytes);
  }
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex64(std::uint64_t value);
std::uint64_t hash_bytes(std::string_view bytes);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

// Runs fn(i) for i in [0, n) over a small pool of threads. fn must only
// write to slot i of its outputs.
template <typename Fn>
void parallel_for(std::size_t n, Fn &&fn) {
  std::size_t workers = std::thread::hardware_concurrency();
  if (workers <= 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto &t : pool) t.join();
}

}  // namespace stratengine
