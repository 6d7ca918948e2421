#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace termret {

// Small deterministic generator used for per-resample substreams.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next(); }

 private:
  std::uint64_t state_;
};

// 64-bit FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data);

// Mixes (seed, index) into an independent substream seed.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

// Unbiased draw from [0, bound) by rejection on the raw 64-bit output. Unlike
// std::uniform_int_distribution the result is identical on every platform.
template <typename Gen>
std::uint64_t uniform_below(Gen& gen, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = gen();
    if (r >= threshold) return r % bound;
  }
}

// Runs fn(i) for i in [0, n) on up to `width` threads. Exceptions from workers
// are rethrown on the caller (first one wins).
void parallel_for(std::size_t n, std::size_t width, const std::function<void(std::size_t)>& fn);

std::string sha256_hex(std::string_view data);

std::string_view trim(std::string_view s);
// Literal (non-regex) replacement of every occurrence of `from`.
std::string replace_all(std::string_view text, std::string_view from, std::string_view to);
std::vector<std::string_view> split(std::string_view s, char sep);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Shortest decimal that round-trips the double (at least 9 significant digits).
std::string format_real(double value);

// Domain as shown in prompts: corpus ids like "heart_failure" read "heart failure".
std::string domain_display_name(std::string_view domain);

}  // namespace termret
