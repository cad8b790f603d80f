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

#ifndef FRAGGRAPH_GRAPH_H_
#define FRAGGRAPH_GRAPH_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fraggraph/event_model.h"
#include "fraggraph/resources.h"

namespace fraggraph {

// Declaration order is significant: it fixes edge emission order, feature
// panel order and the per-type parameter order of the detectors.
enum class EdgeType : std::uint8_t {
  DataFlow,
  Temporal,
  SharedSession,
  SharedResource,
  ArgumentSimilarity,
};

inline constexpr std::size_t kEdgeTypeCount = 5;
// The identity-preserving types, which feed features and message passing.
inline constexpr std::size_t kStructuralEdgeTypes = 4;
inline constexpr std::array<EdgeType, kEdgeTypeCount> kAllEdgeTypes = {
    EdgeType::DataFlow, EdgeType::Temporal, EdgeType::SharedSession,
    EdgeType::SharedResource, EdgeType::ArgumentSimilarity};

const char* edge_type_name(EdgeType type);
std::optional<EdgeType> edge_type_from_name(std::string_view name);
// True for the types that union unconditionally during chain discovery.
bool is_strong(EdgeType type);

// Directed earlier -> later.
struct TypedEdge {
  std::int64_t src = 0;
  std::int64_t dst = 0;
  EdgeType etype = EdgeType::Temporal;
  double weight = 1.0;

  bool operator==(const TypedEdge&) const = default;
};

struct RobustnessConfig {
  int kappa = 8;
  // Maximum event-id distance spanned by any new edge; unset = unbounded.
  std::optional<std::int64_t> window;
  std::size_t resource_capacity = 65536;
  int max_similarity_links = 4;
  std::int64_t resource_cardinality_cutoff = 32;

  // Throws UsageError when out of range.
  void validate() const;
  Json to_json() const;
  static RobustnessConfig from_json(const Json& j);
};

// Hash-index probes made while inserting, for the per-event work bound.
struct ProbeCounters {
  std::uint64_t session_probes = 0;
  std::uint64_t pending_probes = 0;
  std::uint64_t resource_probes = 0;
  std::uint64_t band_probes = 0;
  std::uint64_t candidate_checks = 0;

  std::uint64_t index_probes() const {
    return session_probes + pending_probes + resource_probes + band_probes;
  }
};

// Typed, directed, append-only event graph built one event at a time.
//
// Single writer: insert_event must be called in stream order. A finished
// graph is safe to share between readers.
class InteractionGraph {
 public:
  explicit InteractionGraph(RobustnessConfig config = {});

  // Appends `event` (whose event_id must equal node_count()) and returns the
  // edges it induced, grouped in EdgeType declaration order.
  std::vector<TypedEdge> insert_event(const ToolUseEvent& event);

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<ToolUseEvent>& nodes() const { return nodes_; }
  const ToolUseEvent& node(std::int64_t id) const { return nodes_.at(id); }

  // All edges in emission order.
  const std::vector<TypedEdge>& edges() const { return edges_; }
  std::size_t edge_count(EdgeType type) const;

  // Indices into edges() of the edges of `type` entering / leaving `node`.
  const std::vector<std::size_t>& in_edges(EdgeType type,
                                           std::int64_t node) const {
    return in_[static_cast<std::size_t>(type)][node];
  }
  const std::vector<std::size_t>& out_edges(EdgeType type,
                                            std::int64_t node) const {
    return out_[static_cast<std::size_t>(type)][node];
  }

  std::uint64_t sketch(std::int64_t node) const { return sketches_.at(node); }
  const RobustnessConfig& config() const { return config_; }
  const ProbeCounters& counters() const { return counters_; }
  // Data-quality notes (duplicate or decreasing seq, ...).
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::size_t resource_index_size() const { return resources_.size(); }

  // Rebuilds a read-only graph from stored nodes and edges. Further
  // insert_event calls are rejected.
  static InteractionGraph from_parts(RobustnessConfig config,
                                     std::vector<ToolUseEvent> nodes,
                                     std::vector<TypedEdge> edges);

 private:
  struct SessionState {
    std::int64_t last_event = -1;
    std::int64_t last_seq = 0;
    std::unordered_map<std::int64_t, std::int64_t> pending_calls;
  };
  struct ResourceEntry {
    std::list<std::string>::iterator lru_pos;
    std::int64_t recent = -1;
    std::int64_t cardinality = 0;
  };

  std::optional<TypedEdge> emit_data_flow(const ToolUseEvent& e,
                                          SessionState& session);
  std::optional<TypedEdge> emit_temporal(const ToolUseEvent& e,
                                         const SessionState& session);
  std::optional<TypedEdge> emit_shared_session(const ToolUseEvent& e,
                                               const SessionState& session);
  std::vector<TypedEdge> emit_shared_resource(const ToolUseEvent& e);
  std::vector<TypedEdge> emit_argument_similarity(const ToolUseEvent& e,
                                                  std::uint64_t sketch);
  bool within_window(std::int64_t src, std::int64_t dst) const;
  void add_edge(const TypedEdge& edge);
  void ensure_node_slots();

  RobustnessConfig config_;
  bool frozen_ = false;
  std::vector<ToolUseEvent> nodes_;
  std::vector<std::uint64_t> sketches_;
  std::vector<TypedEdge> edges_;
  std::array<std::vector<std::vector<std::size_t>>, kEdgeTypeCount> in_;
  std::array<std::vector<std::vector<std::size_t>>, kEdgeTypeCount> out_;
  std::array<std::size_t, kEdgeTypeCount> type_counts_{};

  std::unordered_map<std::string, SessionState> sessions_;
  std::list<std::string> lru_;  // most recent first
  std::unordered_map<std::string, ResourceEntry> resources_;
  std::array<std::unordered_map<std::uint16_t, std::vector<std::int64_t>>, 4>
      bands_;
  ProbeCounters counters_;
  std::vector<std::string> warnings_;
};

// Builds a graph from a stream, inserting events in order.
InteractionGraph build_graph(const std::vector<ToolUseEvent>& events,
                             const RobustnessConfig& config = {});

// Versioned text snapshot: header line, node table, one table per edge type.
std::string write_snapshot(const InteractionGraph& graph,
                           const Json& provenance = nullptr);

struct Snapshot {
  InteractionGraph graph;
  Json provenance;
};
Snapshot read_snapshot(std::string_view text);

}  // namespace fraggraph

#endif  // FRAGGRAPH_GRAPH_H_
