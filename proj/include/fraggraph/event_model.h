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

#ifndef FRAGGRAPH_EVENT_MODEL_H_
#define FRAGGRAPH_EVENT_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fraggraph {

using Json = nlohmann::ordered_json;

enum class EventKind { ToolCall, ToolResult };

// One tool call or tool result. For results, `arguments` holds the result
// preview text, so resource extraction and similarity see the payload the
// event actually carried.
struct ToolUseEvent {
  std::int64_t event_id = 0;
  std::string user_id;
  std::string session_id;
  std::int64_t seq = 0;
  std::int64_t iteration = 0;
  EventKind kind = EventKind::ToolCall;
  std::string tool;
  std::string arguments;
  bool success = true;
  std::int64_t request_bytes = 0;
  std::int64_t response_bytes = 0;
  std::optional<std::int64_t> call_index;
  std::optional<std::int64_t> result_index;
  // Opaque timestamp, never interpreted.
  std::string ts;
  // Set when the source carried a structured (non-string) argument value;
  // `arguments` then holds its compact serialization.
  bool structured_arguments = false;
  // Fields outside the known schema, preserved for re-emission.
  Json extra = Json::object();

  bool is_call() const { return kind == EventKind::ToolCall; }
  bool operator==(const ToolUseEvent&) const = default;
};

struct Fragment {
  std::vector<ToolUseEvent> events;
  bool is_cover = false;

  bool operator==(const Fragment&) const = default;
};

struct ChainRecord {
  std::string chain_id;
  bool is_malicious = false;
  std::optional<std::string> campaign;
  std::optional<std::string> campaign_id;
  std::optional<std::string> run_id;
  std::optional<std::int64_t> seed;
  std::optional<std::string> style;
  std::optional<std::string> attack_graph_file;
  // One fragment per session, in fragment order.
  std::vector<Fragment> fragments;
  // Unknown keys of the chain's malicious_source entry.
  Json source_extra = Json::object();

  std::size_t event_count() const;
  bool operator==(const ChainRecord&) const = default;
};

struct EventLabel {
  std::int64_t event_id = 0;
  int y = 0;
  std::optional<std::string> campaign;
};

struct LabelPolicy {
  // When false, events of cover fragments inside malicious chains get y=0.
  bool cover_as_malicious = true;
};

// Events of all chains in stream order with event_id = position.
struct EventStream {
  std::vector<ToolUseEvent> events;
  // Index into the chain list for every event.
  std::vector<std::size_t> chain_of_event;
};

EventStream flatten(const std::vector<ChainRecord>& chains);

std::vector<EventLabel> label_events(const std::vector<ChainRecord>& chains,
                                     const LabelPolicy& policy = {});

// ---- Session logs (JSONL, one envelope record per line) ----

struct SessionMeta {
  std::string session_id;
  std::optional<std::string> run_id;
  std::optional<std::string> campaign;
  std::optional<std::string> style;
  std::optional<std::string> user_id;
};

struct SessionLog {
  std::vector<ToolUseEvent> events;
  // Records of any event type other than tool_call / tool_result.
  std::size_t skipped = 0;
  std::map<std::string, SessionMeta> sessions;
};

SessionLog parse_session_log(std::istream& in);
SessionLog parse_session_log(std::string_view text);

// Writes one session as JSONL: session_start, the tool records, session_end.
std::string emit_session_log(const Fragment& fragment, const SessionMeta& meta);

// ---- Combined files ----

std::vector<ChainRecord> parse_combined(std::string_view text);

// All chains must agree with `is_malicious`. `provenance`, when non-null, is
// written as an extra top-level key.
std::string emit_combined(const std::vector<ChainRecord>& chains,
                          bool is_malicious, const Json& provenance = nullptr);

// ---- Attack-graph files ----

struct Diagnostics {
  std::vector<std::string> warnings;
};

ChainRecord parse_attack_graph(std::string_view text,
                               Diagnostics* diagnostics = nullptr);

// Shared record codec, also used by the graph snapshot.
Json event_to_json(const ToolUseEvent& event);
ToolUseEvent event_from_json(const Json& record);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

}  // namespace fraggraph

#endif  // FRAGGRAPH_EVENT_MODEL_H_
