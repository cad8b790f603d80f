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

#include "fraggraph/graph.h"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <utility>

#include "fraggraph/errors.h"
#include "fraggraph/simhash.h"

namespace fraggraph {
namespace {

constexpr std::string_view kSnapshotMagic = "fraggraph-graph v1";

std::string resource_key(const Resource& r) {
  std::string key(1, static_cast<char>('0' + static_cast<int>(r.kind)));
  key += r.value;
  return key;
}

}  // namespace

const char* edge_type_name(EdgeType type) {
  switch (type) {
    case EdgeType::DataFlow: return "data_flow";
    case EdgeType::Temporal: return "temporal";
    case EdgeType::SharedSession: return "shared_session";
    case EdgeType::SharedResource: return "shared_resource";
    case EdgeType::ArgumentSimilarity: return "argument_similarity";
  }
  return "unknown";
}

std::optional<EdgeType> edge_type_from_name(std::string_view name) {
  for (EdgeType t : kAllEdgeTypes) {
    if (name == edge_type_name(t)) return t;
  }
  return std::nullopt;
}

bool is_strong(EdgeType type) {
  return type == EdgeType::DataFlow || type == EdgeType::Temporal ||
         type == EdgeType::SharedSession;
}

void RobustnessConfig::validate() const {
  if (kappa < 0 || kappa > 64) throw UsageError("kappa must lie in [0, 64]");
  if (window && *window < 1) throw UsageError("window must be >= 1");
  if (resource_capacity < 1) throw UsageError("resource_capacity must be >= 1");
  if (max_similarity_links < 0) {
    throw UsageError("max_similarity_links must be >= 0");
  }
  if (resource_cardinality_cutoff < 1) {
    throw UsageError("resource_cardinality_cutoff must be >= 1");
  }
}

Json RobustnessConfig::to_json() const {
  Json j = Json::object();
  j["kappa"] = kappa;
  j["window"] = window ? Json(*window) : Json(nullptr);
  j["resource_capacity"] = resource_capacity;
  j["max_similarity_links"] = max_similarity_links;
  j["resource_cardinality_cutoff"] = resource_cardinality_cutoff;
  return j;
}

RobustnessConfig RobustnessConfig::from_json(const Json& j) {
  RobustnessConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    if (k == "kappa") {
      c.kappa = v.get<int>();
    } else if (k == "window") {
      if (v.is_null()) {
        c.window.reset();
      } else {
        c.window = v.get<std::int64_t>();
      }
    } else if (k == "resource_capacity") {
      c.resource_capacity = v.get<std::size_t>();
    } else if (k == "max_similarity_links") {
      c.max_similarity_links = v.get<int>();
    } else if (k == "resource_cardinality_cutoff") {
      c.resource_cardinality_cutoff = v.get<std::int64_t>();
    } else {
      throw UsageError("unknown robustness key '" + k + "'");
    }
  }
  c.validate();
  return c;
}

InteractionGraph::InteractionGraph(RobustnessConfig config)
    : config_(std::move(config)) {
  config_.validate();
}

std::size_t InteractionGraph::edge_count(EdgeType type) const {
  return type_counts_[static_cast<std::size_t>(type)];
}

bool InteractionGraph::within_window(std::int64_t src, std::int64_t dst) const {
  return !config_.window || dst - src <= *config_.window;
}

void InteractionGraph::ensure_node_slots() {
  for (std::size_t t = 0; t < kEdgeTypeCount; ++t) {
    in_[t].resize(nodes_.size());
    out_[t].resize(nodes_.size());
  }
}

void InteractionGraph::add_edge(const TypedEdge& edge) {
  const auto t = static_cast<std::size_t>(edge.etype);
  edges_.push_back(edge);
  in_[t][edge.dst].push_back(edges_.size() - 1);
  out_[t][edge.src].push_back(edges_.size() - 1);
  ++type_counts_[t];
}

std::vector<TypedEdge> InteractionGraph::insert_event(const ToolUseEvent& e) {
  if (frozen_) throw UsageError("graph restored from a snapshot is read-only");
  if (e.event_id != static_cast<std::int64_t>(nodes_.size())) {
    throw UsageError("insert_event: event_id " + std::to_string(e.event_id) +
                     " does not equal the next node index " +
                     std::to_string(nodes_.size()));
  }
  nodes_.push_back(e);
  const std::uint64_t sketch = simhash64(e.arguments);
  sketches_.push_back(sketch);
  ensure_node_slots();

  ++counters_.session_probes;
  SessionState& session = sessions_[e.session_id];

  std::vector<TypedEdge> emitted;
  if (auto edge = emit_data_flow(e, session)) emitted.push_back(*edge);
  if (auto edge = emit_temporal(e, session)) emitted.push_back(*edge);
  if (auto edge = emit_shared_session(e, session)) emitted.push_back(*edge);
  for (const auto& edge : emit_shared_resource(e)) emitted.push_back(edge);
  for (const auto& edge : emit_argument_similarity(e, sketch)) {
    emitted.push_back(edge);
  }

  if (session.last_event >= 0 && e.seq <= session.last_seq) {
    warnings_.push_back("session '" + e.session_id + "': event " +
                        std::to_string(e.event_id) + " has seq " +
                        std::to_string(e.seq) + " not above previous seq " +
                        std::to_string(session.last_seq));
  }
  session.last_event = e.event_id;
  session.last_seq = e.seq;

  for (const auto& edge : emitted) add_edge(edge);
  return emitted;
}

std::optional<TypedEdge> InteractionGraph::emit_data_flow(
    const ToolUseEvent& e, SessionState& session) {
  if (e.is_call()) {
    if (e.call_index) session.pending_calls[*e.call_index] = e.event_id;
    return std::nullopt;
  }
  if (!e.result_index) return std::nullopt;
  ++counters_.pending_probes;
  auto it = session.pending_calls.find(*e.result_index);
  if (it == session.pending_calls.end()) return std::nullopt;
  const std::int64_t call = it->second;
  session.pending_calls.erase(it);
  if (!within_window(call, e.event_id)) return std::nullopt;
  return TypedEdge{call, e.event_id, EdgeType::DataFlow, 1.0};
}

std::optional<TypedEdge> InteractionGraph::emit_temporal(
    const ToolUseEvent& e, const SessionState& session) {
  if (session.last_event < 0 || e.seq != session.last_seq + 1) {
    return std::nullopt;
  }
  if (!within_window(session.last_event, e.event_id)) return std::nullopt;
  return TypedEdge{session.last_event, e.event_id, EdgeType::Temporal, 1.0};
}

std::optional<TypedEdge> InteractionGraph::emit_shared_session(
    const ToolUseEvent& e, const SessionState& session) {
  if (session.last_event < 0) return std::nullopt;
  if (!within_window(session.last_event, e.event_id)) return std::nullopt;
  return TypedEdge{session.last_event, e.event_id, EdgeType::SharedSession,
                   1.0};
}

std::vector<TypedEdge> InteractionGraph::emit_shared_resource(
    const ToolUseEvent& e) {
  std::vector<TypedEdge> out;
  for (const Resource& r : extract_resources(e.arguments)) {
    ++counters_.resource_probes;
    const std::string key = resource_key(r);
    auto it = resources_.find(key);
    if (it == resources_.end()) {
      lru_.push_front(key);
      resources_.emplace(key, ResourceEntry{lru_.begin(), e.event_id, 1});
      if (resources_.size() > config_.resource_capacity) {
        resources_.erase(lru_.back());
        lru_.pop_back();
      }
      continue;
    }
    ResourceEntry& entry = it->second;
    lru_.splice(lru_.begin(), lru_, entry.lru_pos);
    entry.cardinality += 1;
    if (entry.cardinality <= config_.resource_cardinality_cutoff &&
        within_window(entry.recent, e.event_id)) {
      out.push_back(TypedEdge{entry.recent, e.event_id,
                              EdgeType::SharedResource,
                              1.0 / static_cast<double>(entry.cardinality)});
    }
    entry.recent = e.event_id;
  }
  return out;
}

std::vector<TypedEdge> InteractionGraph::emit_argument_similarity(
    const ToolUseEvent& e, std::uint64_t sketch) {
  const auto bands = lsh_bands(sketch);
  std::vector<std::int64_t> candidates;
  for (int b = 0; b < kLshBands; ++b) {
    ++counters_.band_probes;
    auto it = bands_[b].find(bands[b]);
    if (it == bands_[b].end()) continue;
    auto& bucket = it->second;
    if (config_.window) {
      const std::int64_t oldest = e.event_id - *config_.window;
      auto keep = std::lower_bound(bucket.begin(), bucket.end(), oldest);
      bucket.erase(bucket.begin(), keep);
    }
    candidates.insert(candidates.end(), bucket.begin(), bucket.end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  std::vector<std::pair<int, std::int64_t>> close;
  for (std::int64_t c : candidates) {
    ++counters_.candidate_checks;
    const int h = hamming(sketch, sketches_[c]);
    if (h <= config_.kappa) close.emplace_back(h, c);
  }
  std::sort(close.begin(), close.end());
  if (close.size() > static_cast<std::size_t>(config_.max_similarity_links)) {
    close.resize(config_.max_similarity_links);
  }
  std::vector<TypedEdge> out;
  for (auto [h, c] : close) {
    out.push_back(TypedEdge{c, e.event_id, EdgeType::ArgumentSimilarity,
                            1.0 - static_cast<double>(h) / 64.0});
  }
  for (int b = 0; b < kLshBands; ++b) bands_[b][bands[b]].push_back(e.event_id);
  return out;
}

InteractionGraph InteractionGraph::from_parts(RobustnessConfig config,
                                              std::vector<ToolUseEvent> nodes,
                                              std::vector<TypedEdge> edges) {
  InteractionGraph g(std::move(config));
  g.nodes_ = std::move(nodes);
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    if (g.nodes_[i].event_id != static_cast<std::int64_t>(i)) {
      throw SchemaError("node " + std::to_string(i) + " has event_id " +
                        std::to_string(g.nodes_[i].event_id));
    }
    g.sketches_.push_back(simhash64(g.nodes_[i].arguments));
  }
  g.ensure_node_slots();
  const auto n = static_cast<std::int64_t>(g.nodes_.size());
  for (const auto& edge : edges) {
    if (edge.src < 0 || edge.dst >= n || edge.src >= edge.dst) {
      throw SchemaError("edge " + std::to_string(edge.src) + "->" +
                        std::to_string(edge.dst) + " is out of range");
    }
    g.add_edge(edge);
  }
  g.frozen_ = true;
  return g;
}

InteractionGraph build_graph(const std::vector<ToolUseEvent>& events,
                             const RobustnessConfig& config) {
  InteractionGraph g(config);
  for (const auto& e : events) g.insert_event(e);
  return g;
}

std::string write_snapshot(const InteractionGraph& graph,
                           const Json& provenance) {
  std::string out(kSnapshotMagic);
  out += '\n';
  Json header = Json::object();
  header["nodes"] = graph.node_count();
  header["edges"] = graph.edges().size();
  Json counts = Json::object();
  for (EdgeType t : kAllEdgeTypes) counts[edge_type_name(t)] = graph.edge_count(t);
  header["edge_counts"] = std::move(counts);
  header["config"] = graph.config().to_json();
  if (!provenance.is_null()) header["provenance"] = provenance;
  out += header.dump() + '\n';
  for (const auto& node : graph.nodes()) {
    out += event_to_json(node).dump() + '\n';
  }
  char buf[96];
  for (EdgeType t : kAllEdgeTypes) {
    out += "edges ";
    out += edge_type_name(t);
    out += ' ' + std::to_string(graph.edge_count(t)) + '\n';
    for (const auto& e : graph.edges()) {
      if (e.etype != t) continue;
      std::snprintf(buf, sizeof(buf), "%lld %lld %.17g\n",
                    static_cast<long long>(e.src),
                    static_cast<long long>(e.dst), e.weight);
      out += buf;
    }
  }
  return out;
}

Snapshot read_snapshot(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() {
    if (!std::getline(in, line)) {
      throw ParseError("unexpected end of graph snapshot", line_no + 1);
    }
    ++line_no;
  };
  next_line();
  if (line != kSnapshotMagic) {
    throw ParseError("not a graph snapshot (bad version line)", line_no);
  }
  next_line();
  Json header = Json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw ParseError("snapshot header is not a JSON object", line_no);
  }
  const auto n_nodes = header.at("nodes").get<std::size_t>();
  std::vector<ToolUseEvent> nodes;
  nodes.reserve(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    next_line();
    Json record = Json::parse(line, nullptr, false);
    if (record.is_discarded()) throw ParseError("bad node record", line_no);
    ToolUseEvent e = event_from_json(record);
    e.event_id = static_cast<std::int64_t>(i);
    nodes.push_back(std::move(e));
  }
  // Edges are stored grouped by type; restore emission order by (dst, type).
  std::vector<TypedEdge> edges;
  for (std::size_t t = 0; t < kEdgeTypeCount; ++t) {
    next_line();
    std::istringstream row(line);
    std::string tag, name;
    std::size_t count = 0;
    row >> tag >> name >> count;
    auto type = edge_type_from_name(name);
    if (tag != "edges" || !type) throw ParseError("bad edge table header", line_no);
    for (std::size_t k = 0; k < count; ++k) {
      next_line();
      TypedEdge e;
      e.etype = *type;
      long long src = 0, dst = 0;
      if (std::sscanf(line.c_str(), "%lld %lld %lf", &src, &dst, &e.weight) != 3) {
        throw ParseError("bad edge row", line_no);
      }
      e.src = src;
      e.dst = dst;
      edges.push_back(e);
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const TypedEdge& a, const TypedEdge& b) {
                     if (a.dst != b.dst) return a.dst < b.dst;
                     return a.etype < b.etype;
                   });
  RobustnessConfig config = RobustnessConfig::from_json(header.at("config"));
  Json provenance = header.contains("provenance") ? header["provenance"] : Json();
  return Snapshot{
      InteractionGraph::from_parts(config, std::move(nodes), std::move(edges)),
      std::move(provenance)};
}

}  // namespace fraggraph
