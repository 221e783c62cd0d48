#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace stratengine {

class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size)
      : size_(size), words_((size + 63) / 64, 0) {}

  std::size_t size() const { return size_; }
  bool test(std::size_t i) const {
    return (words_[i / 64] >> (i % 64)) & 1ULL;
  }
  void set(std::size_t i, bool value = true) {
    auto mask = 1ULL << (i % 64);
    if (value) words_[i / 64] |= mask;
    else words_[i / 64] &= ~mask;
  }
  std::size_t count() const;

  // "101..." with bit 0 first.
  std::string to_bit_string() const;
  static BitVector from_bit_string(std::string_view bits);

  // Nibbles in bit order; bit i is the (3 - i % 4)-th bit of nibble i / 4.
  std::string to_hex() const;
  static BitVector from_hex(std::string_view hex, std::size_t size);

  bool operator==(const BitVector &) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct StrategyFingerprint {
  std::string route_id;
  BitVector bits;

  bool operator==(const StrategyFingerprint &) const = default;
};

// Dump: "#fingerprints<TAB>bits=N<TAB>library=HASH" then
// "route_id<TAB>hexbits" per route.
struct FingerprintSet {
  std::size_t bit_count = 0;
  std::string library_hash;
  std::vector<StrategyFingerprint> fingerprints;
};

void write_fingerprints(std::ostream &out, const FingerprintSet &set);
FingerprintSet read_fingerprints(std::istream &in);
FingerprintSet load_fingerprints(const std::string &path);
std::string fingerprints_hash(const FingerprintSet &set);

}  // namespace stratengine
