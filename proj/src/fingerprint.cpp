#include "stratengine/fingerprint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "stratengine/common.hpp"

namespace stratengine {

std::size_t BitVector::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(__builtin_popcountll(w));
  return n;
}

std::string BitVector::to_bit_string() const {
  std::string s(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if (test(i)) s[i] = '1';
  }
  return s;
}

BitVector BitVector::from_bit_string(std::string_view bits) {
  BitVector v(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') v.set(i);
    else if (bits[i] != '0') throw Error("bit string must contain only 0/1");
  }
  return v;
}

std::string BitVector::to_hex() const {
  static const char digits[] = "0123456789abcdef";
  std::string s((size_ + 3) / 4, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if (test(i)) {
      int nibble = s[i / 4] <= '9' ? s[i / 4] - '0' : s[i / 4] - 'a' + 10;
      nibble |= 1 << (3 - static_cast<int>(i % 4));
      s[i / 4] = digits[nibble];
    }
  }
  return s;
}

BitVector BitVector::from_hex(std::string_view hex, std::size_t size) {
  if (hex.size() != (size + 3) / 4) {
    throw Error("hex fingerprint has " + std::to_string(hex.size()) +
                " digits, expected " + std::to_string((size + 3) / 4));
  }
  BitVector v(size);
  for (std::size_t n = 0; n < hex.size(); ++n) {
    char c = hex[n];
    int nibble;
    if (c >= '0' && c <= '9') nibble = c - '0';
    else if (c >= 'a' && c <= 'f') nibble = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') nibble = c - 'A' + 10;
    else throw Error(std::string("bad hex digit '") + c + "'");
    for (int b = 0; b < 4; ++b) {
      std::size_t i = n * 4 + static_cast<std::size_t>(b);
      bool bit = (nibble >> (3 - b)) & 1;
      if (i >= size) {
        if (bit) throw Error("hex fingerprint sets bits past its length");
        continue;
      }
      if (bit) v.set(i);
    }
  }
  return v;
}

void write_fingerprints(std::ostream &out, const FingerprintSet &set) {
  out << "#fingerprints\tbits=" << set.bit_count
      << "\tlibrary=" << set.library_hash << '\n';
  for (const auto &fp : set.fingerprints) {
    out << fp.route_id << '\t' << fp.bits.to_hex() << '\n';
  }
}

FingerprintSet read_fingerprints(std::istream &in) {
  FingerprintSet set;
  std::string line;
  if (!std::getline(in, line) || line.rfind("#fingerprints\t", 0) != 0) {
    throw Error("fingerprint file is missing its '#fingerprints' header");
  }
  bool have_bits = false;
  for (const auto &field : split(line, '\t')) {
    if (field.rfind("bits=", 0) == 0) {
      set.bit_count = std::stoul(field.substr(5));
      have_bits = true;
    } else if (field.rfind("library=", 0) == 0) {
      set.library_hash = field.substr(8);
    }
  }
  if (!have_bits) throw Error("fingerprint header lacks bits=");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 2) {
      throw Error("fingerprint line " + std::to_string(line_no) +
                  ": expected route_id<TAB>hexbits");
    }
    set.fingerprints.push_back(
        {cols[0], BitVector::from_hex(cols[1], set.bit_count)});
  }
  return set;
}

FingerprintSet load_fingerprints(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open fingerprint file '" + path + "'");
  return read_fingerprints(in);
}

std::string fingerprints_hash(const FingerprintSet &set) {
  std::ostringstream os;
  write_fingerprints(os, set);
  return to_hex64(hash_bytes(os.str()));
}

}  // namespace stratengine
