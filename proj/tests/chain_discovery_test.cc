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
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "fraggraph/errors.h"
#include "fraggraph/rng.h"
#include "fraggraph/synth_corpus.h"
#include "oracles.h"

namespace fraggraph {
namespace {

using testing::Partition;
using testing::fixpoint_oracle;
using testing::partition_of;
using testing::random_edges;
using testing::relabel;

TypedEdge edge(std::int64_t a, std::int64_t b, EdgeType t, double w = 1.0) {
  return {a, b, t, w};
}

TEST(ObserveEdgeTest, StrongEdgeMerges) {
  UnionFind uf(2);
  EXPECT_EQ(uf.observe_edge(edge(0, 1, EdgeType::Temporal)), MergeDecision::Merged);
  EXPECT_EQ(uf.component_count(), 1u);
  EXPECT_EQ(uf.observe_edge(edge(0, 1, EdgeType::DataFlow)), MergeDecision::AlreadyJoined);
}

TEST(ObserveEdgeTest, SingleLightWeakEdgeDefers) {
  UnionFind uf(2);
  EXPECT_EQ(uf.observe_edge(edge(0, 1, EdgeType::SharedResource, 0.25)), MergeDecision::Deferred);
  EXPECT_EQ(uf.support(0, 1), (std::pair<double, int>{0.25, 1}));
  EXPECT_EQ(uf.observe_edge(edge(0, 1, EdgeType::ArgumentSimilarity, 0.125)), MergeDecision::Merged);
}

TEST(ObserveEdgeTest, HeavyWeakEdgeMergesAlone) {
  UnionFind uf(2);
  EXPECT_EQ(uf.observe_edge(edge(0, 1, EdgeType::SharedResource, 0.5)), MergeDecision::Merged);
}

TEST(ObserveEdgeTest, SupportFollowsMergedComponents) {
  // 0 -w- 2 deferred, then 0 and 1 join; 1 -w- 2 is the second agreeing edge.
  UnionFind uf(3);
  EXPECT_EQ(uf.observe_edge(edge(0, 2, EdgeType::SharedResource, 0.125)), MergeDecision::Deferred);
  uf.observe_edge(edge(0, 1, EdgeType::SharedSession));
  EXPECT_EQ(uf.support(1, 2), (std::pair<double, int>{0.125, 1}));
  EXPECT_EQ(uf.observe_edge(edge(1, 2, EdgeType::SharedResource, 0.125)), MergeDecision::Merged);
}

TEST(ObserveEdgeTest, BadEndpointsAndTypes) {
  UnionFind uf(2);
  EXPECT_THROW(uf.observe_edge(edge(0, 5, EdgeType::Temporal)), UsageError);
  EXPECT_THROW(uf.observe_edge(edge(0, 1, static_cast<EdgeType>(9))), UsageError);
  EXPECT_THROW(UnionFind(1, DiscoveryConfig{0.0, 2}), UsageError);
  EXPECT_THROW(UnionFind(1, DiscoveryConfig{0.5, 0}), UsageError);
}

TEST(ComponentsTest, NoEdgesGivesSingletons) {
  const auto chains = components(UnionFind(5));
  ASSERT_EQ(chains.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(chains[i].chain_id, static_cast<std::int64_t>(i));
    EXPECT_EQ(chains[i].members, std::vector<std::int64_t>{static_cast<std::int64_t>(i)});
  }
}

TEST(ComponentsTest, TemporalRunIsOneChain) {
  UnionFind uf(8);
  for (int i = 0; i + 1 < 8; ++i) uf.observe_edge(edge(i, i + 1, EdgeType::Temporal));
  const auto chains = components(uf);
  ASSERT_EQ(chains.size(), 1u);
  EXPECT_EQ(chains[0].members.size(), 8u);
}

TEST(ComponentsTest, OrderedBySmallestMember) {
  UnionFind uf(5);
  uf.observe_edge(edge(3, 4, EdgeType::Temporal));
  uf.observe_edge(edge(1, 4, EdgeType::Temporal));
  const auto chains = components(uf);
  ASSERT_EQ(chains.size(), 3u);
  EXPECT_EQ(chains[1].members, (std::vector<std::int64_t>{1, 3, 4}));
  EXPECT_EQ(chains[2].members, std::vector<std::int64_t>{2});
}

// --- oracles -----------------------------------------------------------------

Partition partition_of(const UnionFind& uf) {
  Partition out;
  for (const auto& c : components(uf)) out.push_back(c.members);
  std::sort(out.begin(), out.end());
  return out;
}

// Total of the deferred weak edges between components a and b.
bool clears(const std::vector<TypedEdge>& deferred, const std::vector<int>& label, int a, int b,
            const DiscoveryConfig& cfg) {
  double w = 0;
  int count = 0;
  for (const auto& d : deferred) {
    const int x = label[d.src], y = label[d.dst];
    if ((x == a && y == b) || (x == b && y == a)) {
      w += d.weight;
      ++count;
    }
  }
  return count >= cfg.weak_edge_quorum || w >= cfg.rho;
}

// Replays the edges in order with a plain label array. Support between two
// components is recounted from scratch over every deferred weak edge.
std::vector<MergeDecision> ordered_oracle(std::size_t n, const std::vector<TypedEdge>& edges,
                                          const DiscoveryConfig& cfg, std::vector<int>& label) {
  label.resize(n);
  for (std::size_t v = 0; v < n; ++v) label[v] = static_cast<int>(v);
  std::vector<TypedEdge> deferred;
  std::vector<MergeDecision> out;
  for (const auto& e : edges) {
    const int a = label[e.src], b = label[e.dst];
    if (a == b) {
      out.push_back(MergeDecision::AlreadyJoined);
      continue;
    }
    bool merge = is_strong(e.etype);
    if (!merge) {
      deferred.push_back(e);
      merge = clears(deferred, label, a, b, cfg);
    }
    if (!merge) {
      out.push_back(MergeDecision::Deferred);
      continue;
    }
    relabel(label, b, a);
    out.push_back(MergeDecision::Merged);
    // Keep merging the grown component while any neighbour clears the bar.
    for (bool again = true; again;) {
      again = false;
      for (const auto& d : deferred) {
        int x = label[d.src], y = label[d.dst];
        if (x == y || (x != a && y != a)) continue;
        if (x != a) std::swap(x, y);
        if (clears(deferred, label, a, y, cfg)) {
          relabel(label, y, a);
          again = true;
          break;
        }
      }
    }
  }
  return out;
}

TEST(UnionFindOracleTest, MatchesOrderedReplay) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 200));
    const auto edges = random_edges(rng, n, rng.uniform_int(0, 2 * n));
    const DiscoveryConfig cfg{static_cast<double>(rng.uniform_int(1, 8)) / 8.0,
                              static_cast<int>(rng.uniform_int(1, 4))};
    UnionFind uf(n, cfg);
    std::vector<MergeDecision> got;
    for (const auto& e : edges) got.push_back(uf.observe_edge(e));
    std::vector<int> label;
    ASSERT_EQ(got, ordered_oracle(n, edges, cfg, label)) << "trial " << trial;
    ASSERT_EQ(partition_of(uf), partition_of(label));
    ASSERT_EQ(partition_of(uf), fixpoint_oracle(n, edges, cfg));
    ASSERT_EQ(uf.component_count(), partition_of(uf).size());
  }
}

TEST(UnionFindOracleTest, PartitionIgnoresEdgeOrder) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 120;
    auto edges = random_edges(rng, n, 200);
    UnionFind first(n);
    for (const auto& e : edges) first.observe_edge(e);
    // Strong edges only, then everything.
    std::vector<std::size_t> strong;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (is_strong(edges[k].etype)) strong.push_back(k);
    }
    auto permuted = edges;
    auto order = strong;
    rng.shuffle(order);
    for (std::size_t k = 0; k < strong.size(); ++k) permuted[strong[k]] = edges[order[k]];
    UnionFind second(n);
    for (const auto& e : permuted) second.observe_edge(e);
    ASSERT_EQ(partition_of(first), partition_of(second));
    rng.shuffle(permuted);
    UnionFind third(n);
    for (const auto& e : permuted) third.observe_edge(e);
    ASSERT_EQ(partition_of(first), partition_of(third));
  }
}

TEST(UnionFindTest, FindIsIdempotent) {
  Rng rng(8);
  UnionFind uf(50);
  for (const auto& e : random_edges(rng, 50, 60)) uf.observe_edge(e);
  const UnionFind& view = uf;
  for (std::int64_t v = 0; v < 50; ++v) {
    const auto r = view.find(v);
    EXPECT_EQ(uf.find(v), r);
    EXPECT_EQ(uf.find(r), r);
  }
}

TEST(DumpChainsTest, MajorityCampaign) {
  UnionFind uf(4);
  uf.observe_edge(edge(0, 1, EdgeType::Temporal));
  uf.observe_edge(edge(1, 2, EdgeType::Temporal));
  const std::vector<std::optional<std::string>> campaign = {"b", "a", "a", std::nullopt};
  const auto text = dump_chains(components(uf), campaign);
  EXPECT_EQ(text,
            "{\"chain_id\":0,\"members\":[0,1,2],\"sessions\":[],\"campaign\":\"a\"}\n"
            "{\"chain_id\":1,\"members\":[3],\"sessions\":[],\"campaign\":null}\n");
}

TEST(GeneratedCorpusTest, MaliciousChainsAreWholeAndPure) {
  GeneratorConfig gen = GeneratorConfig::defaults();
  gen.n_malicious = 40;
  gen.n_benign = 60;
  const Corpus corpus = generate(gen);
  const EventStream stream = flatten(corpus.chains);
  const auto graph = build_graph(stream.events);
  const auto chains = components(discover(graph), &graph);
  std::vector<std::size_t> found_in(stream.events.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (auto v : chains[c].members) found_in[v] = c;
  }
  std::map<std::size_t, std::set<std::size_t>> discovered_of_truth;
  std::map<std::size_t, std::set<std::string>> campaigns_in;
  for (std::size_t v = 0; v < stream.events.size(); ++v) {
    const auto& truth = corpus.chains[stream.chain_of_event[v]];
    if (!truth.is_malicious) continue;
    discovered_of_truth[stream.chain_of_event[v]].insert(found_in[v]);
    campaigns_in[found_in[v]].insert(*truth.campaign);
  }
  for (const auto& [truth, found] : discovered_of_truth) {
    EXPECT_EQ(found.size(), 1u) << corpus.chains[truth].chain_id;
  }
  for (const auto& [c, names] : campaigns_in) EXPECT_EQ(names.size(), 1u) << "chain " << c;
}

}  // namespace
}  // namespace fraggraph
