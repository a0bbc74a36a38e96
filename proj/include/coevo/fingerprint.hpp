#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace coevo {

// FNV-1a, 64 bit. Used for dataset and model fingerprints in run records.
class Fnv1a64 {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void update(double v) { update(&v, sizeof(v)); }
  void update(std::uint64_t v) { update(&v, sizeof(v)); }
  void update(const std::string& s) { update(s.data(), s.size()); }
  void update(const std::vector<double>& v) {
    for (double x : v) update(x);
  }
  std::uint64_t value() const { return hash_; }
  std::string hex() const { return to_hex(hash_); }

  static std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = digits[v & 0xf];
      v >>= 4;
    }
    return s;
  }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

// splitmix64; derives independent RNG streams from (seed, stream index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace coevo
