#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dgif {

/// Deterministic RNG. All randomness in the library goes through this class so
/// that a seed pins every downstream artifact bit-for-bit. The [0,1) mapping is
/// hand-rolled instead of std::uniform_real_distribution to stay independent of
/// the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform index in [0, n). Rejection-sampled, exact.
  std::size_t index(std::size_t n);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

std::vector<std::string> split(const std::string& s, char sep);
std::vector<std::string> split_whitespace(const std::string& s);
std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::string lower(const std::string& s);
std::string trim(const std::string& s);

/// Canonical textual form of a double for logs and key=value blocks ("%.12g").
std::string fmt_double(double v);

std::string read_file(const std::string& path);
bool file_exists(const std::string& path);

/// Write-then-rename so an interrupted run never leaves a truncated file.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace dgif
