/*
 * Copyright 2026 The FragGraph Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FRAGGRAPH_SIMHASH_H_
#define FRAGGRAPH_SIMHASH_H_

#include <array>
#include <bit>
#include <cstdint>
#include <string_view>

namespace fraggraph {

// 64-bit SimHash over overlapping byte 3-grams of the ASCII-lowercased input,
// each token hashed with FNV-1a followed by the fmix64 finalizer. Bit b is set iff strictly more tokens have
// bit b set than clear. Inputs shorter than three bytes form a single token.
std::uint64_t simhash64(std::string_view text);

inline int hamming(std::uint64_t a, std::uint64_t b) {
  return std::popcount(a ^ b);
}

inline constexpr int kLshBands = 4;

// The four 16-bit bands, least significant first.
inline std::array<std::uint16_t, kLshBands> lsh_bands(std::uint64_t sketch) {
  return {static_cast<std::uint16_t>(sketch),
          static_cast<std::uint16_t>(sketch >> 16),
          static_cast<std::uint16_t>(sketch >> 32),
          static_cast<std::uint16_t>(sketch >> 48)};
}

}  // namespace fraggraph

#endif  // FRAGGRAPH_SIMHASH_H_
