#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace dearfed {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  return h;
}

/// Independent stream seed for (base, tag, indices...). Every random
/// consumer in the simulator draws from its own derived stream so that
/// skipping or reordering work elsewhere never shifts its numbers.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::initializer_list<std::uint64_t> idx = {}) {
  std::uint64_t s = mix64(base ^ mix64(hash_tag(tag)));
  for (std::uint64_t i : idx) s = mix64(s ^ mix64(i + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t base, std::string_view tag,
                    std::initializer_list<std::uint64_t> idx = {}) {
  return Rng(derive_seed(base, tag, idx));
}

}  // namespace dearfed
