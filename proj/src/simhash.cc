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

#include "fraggraph/simhash.h"

#include <cctype>
#include <string>

#include "fraggraph/hashing.h"

namespace fraggraph {

std::uint64_t simhash64(std::string_view text) {
  std::string folded(text);
  for (char& c : folded) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  std::array<int, 64> votes{};
  auto vote = [&](std::string_view token) {
    // FNV-1a alone leaves many bits nearly constant over short tokens, which
    // drags unrelated sketches together; the finalizer fixes the bias.
    const std::uint64_t h = fmix64(fnv1a64(token));
    for (int b = 0; b < 64; ++b) votes[b] += ((h >> b) & 1) ? 1 : -1;
  };
  if (folded.size() < 3) {
    vote(folded);
  } else {
    for (std::size_t i = 0; i + 3 <= folded.size(); ++i) {
      vote(std::string_view(folded).substr(i, 3));
    }
  }
  std::uint64_t sketch = 0;
  for (int b = 0; b < 64; ++b) {
    if (votes[b] > 0) sketch |= (1ULL << b);
  }
  return sketch;
}

}  // namespace fraggraph
