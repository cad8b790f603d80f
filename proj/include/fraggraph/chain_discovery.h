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

#ifndef FRAGGRAPH_CHAIN_DISCOVERY_H_
#define FRAGGRAPH_CHAIN_DISCOVERY_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fraggraph/event_model.h"
#include "fraggraph/graph.h"

namespace fraggraph {

struct DiscoveryConfig {
  double rho = 0.5;
  int weak_edge_quorum = 2;

  void validate() const;
  Json to_json() const;
  static DiscoveryConfig from_json(const Json& j);
};

enum class MergeDecision { Merged, Deferred, AlreadyJoined };

const char* merge_decision_name(MergeDecision decision);

// Union-find over event ids that merges on strong edges immediately and on
// weak edges (shared resource, argument similarity) once the support
// accumulated between two components reaches a quorum of edges or a total
// weight of rho.
//
// Support is keyed by the unordered pair of current roots. When two
// components merge, the support each held towards third components is
// summed under the surviving root, so the support between two components
// always equals the total of the deferred weak edges running between them.
// A sum that reaches the bar merges at once; the final partition is then the
// closure of the edge set and does not depend on edge order.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n = 0, DiscoveryConfig config = {});

  // Grows the element set to `n` singletons.
  void resize(std::size_t n);
  std::size_t size() const { return parent_.size(); }

  std::int64_t find(std::int64_t x);
  std::int64_t find(std::int64_t x) const;
  bool unite(std::int64_t a, std::int64_t b);

  MergeDecision observe_edge(const TypedEdge& edge);

  std::size_t component_count() const { return components_; }
  const DiscoveryConfig& config() const { return config_; }

  // Accumulated (weight, count) between the components of a and b.
  std::pair<double, int> support(std::int64_t a, std::int64_t b) const;

 private:
  using Key = std::pair<std::int64_t, std::int64_t>;
  struct Support {
    double weight = 0.0;
    int count = 0;
  };
  static Key key_of(std::int64_t a, std::int64_t b) {
    return a < b ? Key{a, b} : Key{b, a};
  }
  void link(std::int64_t survivor, std::int64_t absorbed);
  std::int64_t link_roots(std::int64_t ra, std::int64_t rb);
  bool reaches_threshold(const Support& s) const;

  DiscoveryConfig config_;
  std::vector<std::int64_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::size_t components_ = 0;
  std::map<Key, Support> support_;
  // Roots each root currently holds support with.
  std::map<std::int64_t, std::set<std::int64_t>> partners_;
};

struct Chain {
  std::int64_t chain_id = 0;
  std::vector<std::int64_t> members;  // ascending
  std::set<std::string> sessions;
  std::optional<double> score;
};

// Components ordered by smallest member; members ascending. Sessions are
// filled from `graph` when given.
std::vector<Chain> components(const UnionFind& uf,
                              const InteractionGraph* graph = nullptr);

// Runs every edge of `graph` through a fresh union-find in emission order.
UnionFind discover(const InteractionGraph& graph,
                   const DiscoveryConfig& config = {});

// One JSON line per chain. `campaign_of_event`, when non-empty, adds the
// majority campaign among labelled members.
std::string dump_chains(
    const std::vector<Chain>& chains,
    const std::vector<std::optional<std::string>>& campaign_of_event = {});

}  // namespace fraggraph

#endif  // FRAGGRAPH_CHAIN_DISCOVERY_H_
