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

#include "fraggraph/chain_discovery.h"

#include <algorithm>
#include <numeric>

#include "fraggraph/errors.h"

namespace fraggraph {

void DiscoveryConfig::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) throw UsageError("rho must lie in (0, 1]");
  if (weak_edge_quorum < 1) throw UsageError("weak_edge_quorum must be >= 1");
}

Json DiscoveryConfig::to_json() const {
  Json j = Json::object();
  j["rho"] = rho;
  j["weak_edge_quorum"] = weak_edge_quorum;
  return j;
}

DiscoveryConfig DiscoveryConfig::from_json(const Json& j) {
  DiscoveryConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "rho") {
      c.rho = it.value().get<double>();
    } else if (it.key() == "weak_edge_quorum") {
      c.weak_edge_quorum = it.value().get<int>();
    } else {
      throw UsageError("unknown discovery key '" + it.key() + "'");
    }
  }
  c.validate();
  return c;
}

const char* merge_decision_name(MergeDecision decision) {
  switch (decision) {
    case MergeDecision::Merged: return "merged";
    case MergeDecision::Deferred: return "deferred";
    case MergeDecision::AlreadyJoined: return "already-joined";
  }
  return "unknown";
}

UnionFind::UnionFind(std::size_t n, DiscoveryConfig config)
    : config_(config) {
  config_.validate();
  resize(n);
}

void UnionFind::resize(std::size_t n) {
  for (std::size_t i = parent_.size(); i < n; ++i) {
    parent_.push_back(static_cast<std::int64_t>(i));
    rank_.push_back(0);
    ++components_;
  }
}

std::int64_t UnionFind::find(std::int64_t x) {
  std::int64_t root = x;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[x] != root) {
    const std::int64_t next = parent_[x];
    parent_[x] = root;
    x = next;
  }
  return root;
}

std::int64_t UnionFind::find(std::int64_t x) const {
  while (parent_[x] != x) x = parent_[x];
  return x;
}

void UnionFind::link(std::int64_t survivor, std::int64_t absorbed) {
  parent_[absorbed] = survivor;
  --components_;
  support_.erase(key_of(survivor, absorbed));
  if (auto it = partners_.find(survivor); it != partners_.end()) {
    it->second.erase(absorbed);
  }
  auto node = partners_.extract(absorbed);
  if (node.empty()) return;
  for (std::int64_t other : node.mapped()) {
    if (other == survivor) continue;
    auto old_it = support_.find(key_of(absorbed, other));
    const Support moved = old_it->second;
    support_.erase(old_it);
    Support& target = support_[key_of(survivor, other)];
    target.weight += moved.weight;
    target.count += moved.count;
    partners_[other].erase(absorbed);
    partners_[other].insert(survivor);
    partners_[survivor].insert(other);
  }
}

bool UnionFind::reaches_threshold(const Support& s) const {
  return s.count >= config_.weak_edge_quorum || s.weight >= config_.rho;
}

std::int64_t UnionFind::link_roots(std::int64_t ra, std::int64_t rb) {
  if (rank_[ra] < rank_[rb]) std::swap(ra, rb);
  if (rank_[ra] == rank_[rb]) ++rank_[ra];
  link(ra, rb);
  return ra;
}

bool UnionFind::unite(std::int64_t a, std::int64_t b) {
  const std::int64_t ra = find(a);
  const std::int64_t rb = find(b);
  if (ra == rb) return false;
  std::int64_t root = link_roots(ra, rb);
  // Summed support may now clear the bar towards a third component; settle
  // those merges too, so the partition never depends on edge order.
  for (bool again = true; again;) {
    again = false;
    auto it = partners_.find(root);
    if (it == partners_.end()) break;
    for (std::int64_t other : it->second) {
      if (reaches_threshold(support_.at(key_of(root, other)))) {
        root = link_roots(root, other);
        again = true;
        break;
      }
    }
  }
  return true;
}

MergeDecision UnionFind::observe_edge(const TypedEdge& edge) {
  const auto n = static_cast<std::int64_t>(parent_.size());
  if (edge.src < 0 || edge.dst < 0 || edge.src >= n || edge.dst >= n) {
    throw UsageError("observe_edge: endpoint not inserted");
  }
  const auto type_index = static_cast<std::size_t>(edge.etype);
  if (type_index >= kEdgeTypeCount) {
    throw UsageError("observe_edge: unknown edge type");
  }
  const std::int64_t ra = find(edge.src);
  const std::int64_t rb = find(edge.dst);
  if (ra == rb) return MergeDecision::AlreadyJoined;
  if (is_strong(edge.etype)) {
    unite(ra, rb);
    return MergeDecision::Merged;
  }
  Support& s = support_[key_of(ra, rb)];
  s.weight += edge.weight;
  s.count += 1;
  partners_[ra].insert(rb);
  partners_[rb].insert(ra);
  if (reaches_threshold(s)) {
    unite(ra, rb);
    return MergeDecision::Merged;
  }
  return MergeDecision::Deferred;
}

std::pair<double, int> UnionFind::support(std::int64_t a,
                                          std::int64_t b) const {
  auto it = support_.find(key_of(find(a), find(b)));
  if (it == support_.end()) return {0.0, 0};
  return {it->second.weight, it->second.count};
}

std::vector<Chain> components(const UnionFind& uf,
                              const InteractionGraph* graph) {
  const auto n = static_cast<std::int64_t>(uf.size());
  std::vector<std::int64_t> slot(n, -1);
  std::vector<Chain> chains;
  for (std::int64_t v = 0; v < n; ++v) {
    const std::int64_t root = uf.find(v);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::int64_t>(chains.size());
      chains.emplace_back().chain_id = slot[root];
    }
    Chain& chain = chains[slot[root]];
    chain.members.push_back(v);
    if (graph && v < static_cast<std::int64_t>(graph->node_count())) {
      chain.sessions.insert(graph->node(v).session_id);
    }
  }
  return chains;
}

UnionFind discover(const InteractionGraph& graph,
                   const DiscoveryConfig& config) {
  UnionFind uf(graph.node_count(), config);
  for (const auto& edge : graph.edges()) uf.observe_edge(edge);
  return uf;
}

std::string dump_chains(
    const std::vector<Chain>& chains,
    const std::vector<std::optional<std::string>>& campaign_of_event) {
  std::string out;
  for (const auto& chain : chains) {
    Json j = Json::object();
    j["chain_id"] = chain.chain_id;
    j["members"] = chain.members;
    j["sessions"] = chain.sessions;
    if (!campaign_of_event.empty()) {
      std::map<std::string, std::size_t> votes;
      for (auto v : chain.members) {
        if (v < static_cast<std::int64_t>(campaign_of_event.size()) &&
            campaign_of_event[v]) {
          ++votes[*campaign_of_event[v]];
        }
      }
      // Highest count, ties to the smaller name.
      const std::string* best = nullptr;
      std::size_t best_count = 0;
      for (const auto& [name, count] : votes) {
        if (count > best_count) {
          best = &name;
          best_count = count;
        }
      }
      j["campaign"] = best ? Json(*best) : Json(nullptr);
    }
    if (chain.score) j["score"] = *chain.score;
    out += j.dump() + '\n';
  }
  return out;
}

}  // namespace fraggraph
