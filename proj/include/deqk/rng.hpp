#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace deqk {

/// A labeled substream of a master seed. Data, DEQ weights and explicit
/// weights draw from distinct labels so that none perturbs the others.
struct RngSpec {
  std::uint64_t seed = 0;
  std::string stream_label;

  RngSpec child(std::string_view suffix) const {
    return {seed, stream_label + "/" + std::string(suffix)};
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

inline std::uint64_t stream_seed(const RngSpec& spec) {
  return detail::splitmix64(detail::splitmix64(spec.seed) ^ detail::fnv1a(spec.stream_label));
}

inline std::mt19937_64 make_engine(const RngSpec& spec) { return std::mt19937_64(stream_seed(spec)); }

}  // namespace deqk
