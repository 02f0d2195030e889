/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace xbarmap {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed, a stream name and an
/// index. All randomness in an experiment flows from one top-level seed via
/// named sub-streams ("init", "shuffle", "data", "variation") so that any
/// part of a run can be reproduced in isolation.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(base);
  for (char c : stream) {
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  }
  return splitmix64(h ^ index);
}

inline Rng make_rng(std::uint64_t base, std::string_view stream,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(base, stream, index));
}

} // namespace xbarmap
