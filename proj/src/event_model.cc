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

#include "fraggraph/event_model.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <array>
#include <utility>

#include "fraggraph/errors.h"

namespace fraggraph {
namespace {

constexpr std::array<std::string_view, 7> kCommonKeys = {
    "seq", "ts", "event", "session_id", "user_id", "iteration", "tool"};
constexpr std::array<std::string_view, 3> kCallKeys = {
    "arguments", "arguments_bytes", "tool_call_index"};
constexpr std::array<std::string_view, 4> kResultKeys = {
    "success", "result_preview", "result_bytes", "tool_result_index"};
constexpr std::array<std::string_view, 7> kSourceKeys = {
    "run_id",   "seed",  "campaign",       "campaign_id",
    "attack_graph_file", "style", "cover_fragments"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& keys, std::string_view key) {
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

std::string indexed_id(std::string_view prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-%05zu", index);
  return std::string(prefix) + buf;
}

std::string fragment_session_id(const std::string& chain_id, std::size_t k) {
  return chain_id + "/s" + std::to_string(k);
}

std::int64_t get_int(const Json& record, std::string_view key,
                     std::string_view where) {
  const auto& v = record.at(std::string(key));
  if (!v.is_number_integer()) {
    throw SchemaError(std::string(where) + ": field '" + std::string(key) +
                      "' must be an integer");
  }
  return v.get<std::int64_t>();
}

std::optional<std::string> opt_string(const Json& record,
                                      std::string_view key) {
  auto it = record.find(std::string(key));
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

std::string string_or_dump(const Json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

// Fallbacks used when a record omits identifying fields.
struct RecordContext {
  std::string where;
  std::string session_id;
  std::string user_id;
  std::int64_t seq = 0;
  std::int64_t calls_seen = 0;
  std::int64_t results_seen = 0;
};

ToolUseEvent decode_tool_record(const Json& r, const RecordContext& ctx) {
  if (!r.is_object()) throw SchemaError(ctx.where + ": tool use is not an object");
  auto type_it = r.find("event");
  if (type_it == r.end() || !type_it->is_string()) {
    throw SchemaError(ctx.where + ": missing field 'event'");
  }
  const std::string type = type_it->get<std::string>();
  ToolUseEvent e;
  if (type == "tool_call") {
    e.kind = EventKind::ToolCall;
  } else if (type == "tool_result") {
    e.kind = EventKind::ToolResult;
  } else {
    throw SchemaError(ctx.where + ": unexpected event type '" + type + "'");
  }

  e.seq = r.contains("seq") ? get_int(r, "seq", ctx.where) : ctx.seq;
  e.ts = r.contains("ts") ? string_or_dump(r["ts"]) : std::string();
  e.session_id = opt_string(r, "session_id").value_or(ctx.session_id);
  e.user_id = opt_string(r, "user_id").value_or(ctx.user_id);
  e.iteration =
      r.contains("iteration") ? get_int(r, "iteration", ctx.where) : 0;
  e.tool = opt_string(r, "tool").value_or("");

  if (e.is_call()) {
    if (auto it = r.find("arguments"); it != r.end() && !it->is_null()) {
      e.structured_arguments = !it->is_string();
      e.arguments = string_or_dump(*it);
    }
    e.request_bytes = r.contains("arguments_bytes")
                          ? get_int(r, "arguments_bytes", ctx.where)
                          : static_cast<std::int64_t>(e.arguments.size());
    e.response_bytes = 0;
    e.success = true;
    e.call_index = r.contains("tool_call_index")
                       ? get_int(r, "tool_call_index", ctx.where)
                       : ctx.calls_seen;
  } else {
    if (auto it = r.find("success"); it != r.end()) {
      if (!it->is_boolean()) {
        throw SchemaError(ctx.where + ": field 'success' must be boolean");
      }
      e.success = it->get<bool>();
    }
    if (auto it = r.find("result_preview"); it != r.end() && !it->is_null()) {
      e.structured_arguments = !it->is_string();
      e.arguments = string_or_dump(*it);
    }
    e.request_bytes = 0;
    e.response_bytes = r.contains("result_bytes")
                           ? get_int(r, "result_bytes", ctx.where)
                           : static_cast<std::int64_t>(e.arguments.size());
    e.result_index = r.contains("tool_result_index")
                         ? get_int(r, "tool_result_index", ctx.where)
                         : ctx.results_seen;
  }
  if (e.request_bytes < 0 || e.response_bytes < 0) {
    throw SchemaError(ctx.where + ": negative byte count");
  }

  for (auto it = r.begin(); it != r.end(); ++it) {
    const std::string& key = it.key();
    if (contains(kCommonKeys, key)) continue;
    if (e.is_call() ? contains(kCallKeys, key) : contains(kResultKeys, key)) {
      continue;
    }
    e.extra[key] = it.value();
  }
  return e;
}

Json payload_value(const ToolUseEvent& e) {
  if (e.structured_arguments) {
    Json parsed = Json::parse(e.arguments, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
  }
  return e.arguments;
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + offset, '\n'));
}

Json parse_document(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& err) {
    throw ParseError(err.what(), line_of_offset(text, err.byte));
  }
}

}  // namespace

std::size_t ChainRecord::event_count() const {
  std::size_t n = 0;
  for (const auto& f : fragments) n += f.events.size();
  return n;
}

EventStream flatten(const std::vector<ChainRecord>& chains) {
  EventStream stream;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (const auto& fragment : chains[c].fragments) {
      for (const auto& event : fragment.events) {
        auto& e = stream.events.emplace_back(event);
        e.event_id = static_cast<std::int64_t>(stream.events.size() - 1);
        stream.chain_of_event.push_back(c);
      }
    }
  }
  return stream;
}

std::vector<EventLabel> label_events(const std::vector<ChainRecord>& chains,
                                     const LabelPolicy& policy) {
  std::vector<EventLabel> labels;
  for (const auto& chain : chains) {
    for (const auto& fragment : chain.fragments) {
      const bool positive = chain.is_malicious &&
                            (policy.cover_as_malicious || !fragment.is_cover);
      for (std::size_t k = 0; k < fragment.events.size(); ++k) {
        EventLabel label;
        label.event_id = static_cast<std::int64_t>(labels.size());
        label.y = positive ? 1 : 0;
        if (positive) label.campaign = chain.campaign;
        labels.push_back(std::move(label));
      }
    }
  }
  return labels;
}

Json event_to_json(const ToolUseEvent& e) {
  Json r = Json::object();
  r["seq"] = e.seq;
  r["ts"] = e.ts;
  r["event"] = e.is_call() ? "tool_call" : "tool_result";
  r["session_id"] = e.session_id;
  r["user_id"] = e.user_id;
  r["iteration"] = e.iteration;
  r["tool"] = e.tool;
  if (e.is_call()) {
    r["arguments"] = payload_value(e);
    r["arguments_bytes"] = e.request_bytes;
    if (e.call_index) r["tool_call_index"] = *e.call_index;
  } else {
    r["success"] = e.success;
    r["result_preview"] = payload_value(e);
    r["result_bytes"] = e.response_bytes;
    if (e.result_index) r["tool_result_index"] = *e.result_index;
  }
  for (auto it = e.extra.begin(); it != e.extra.end(); ++it) {
    r[it.key()] = it.value();
  }
  return r;
}

ToolUseEvent event_from_json(const Json& record) {
  RecordContext ctx;
  ctx.where = "event record";
  for (auto key : {"seq", "session_id", "event"}) {
    if (!record.contains(key)) {
      throw SchemaError(ctx.where + ": missing field '" + key + "'");
    }
  }
  return decode_tool_record(record, ctx);
}

// ---- Session logs ----

SessionLog parse_session_log(std::istream& in) {
  SessionLog log;
  std::map<std::string, std::int64_t> calls_seen;
  std::map<std::string, std::int64_t> results_seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record = Json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw ParseError("session log record is not a JSON object", line_no);
    }
    const std::string where = "line " + std::to_string(line_no);
    for (auto key : {"seq", "ts", "event", "session_id"}) {
      if (!record.contains(key)) {
        throw SchemaError(where + ": missing envelope field '" + key + "'");
      }
    }
    if (!record["event"].is_string() || !record["session_id"].is_string()) {
      throw SchemaError(where + ": envelope fields 'event' and 'session_id' "
                                "must be strings");
    }
    const std::string type = record["event"].get<std::string>();
    const std::string session = record["session_id"].get<std::string>();
    auto& meta = log.sessions[session];
    meta.session_id = session;

    if (type == "session_start") {
      if (auto v = opt_string(record, "run_id")) meta.run_id = v;
      if (auto v = opt_string(record, "campaign")) meta.campaign = v;
      if (auto v = opt_string(record, "style")) meta.style = v;
      if (auto v = opt_string(record, "user_id")) meta.user_id = v;
      ++log.skipped;
      continue;
    }
    if (type != "tool_call" && type != "tool_result") {
      ++log.skipped;
      continue;
    }
    RecordContext ctx;
    ctx.where = where;
    ctx.session_id = session;
    ctx.user_id = meta.user_id.value_or("");
    ctx.calls_seen = calls_seen[session];
    ctx.results_seen = results_seen[session];
    ToolUseEvent e = decode_tool_record(record, ctx);
    (e.is_call() ? calls_seen : results_seen)[session] += 1;
    e.event_id = static_cast<std::int64_t>(log.events.size());
    log.events.push_back(std::move(e));
  }
  return log;
}

SessionLog parse_session_log(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_session_log(in);
}

std::string emit_session_log(const Fragment& fragment,
                             const SessionMeta& meta) {
  std::string out;
  const std::string first_ts =
      fragment.events.empty() ? std::string() : fragment.events.front().ts;
  Json start = Json::object();
  start["seq"] = 0;
  start["ts"] = first_ts;
  start["event"] = "session_start";
  start["session_id"] = meta.session_id;
  start["schema_version"] = 1;
  if (meta.run_id) start["run_id"] = *meta.run_id;
  if (meta.campaign) start["campaign"] = *meta.campaign;
  if (meta.style) start["style"] = *meta.style;
  if (meta.user_id) start["user_id"] = *meta.user_id;
  out += start.dump() + "\n";

  std::int64_t last_seq = 0;
  std::string last_ts = first_ts;
  for (const auto& e : fragment.events) {
    out += event_to_json(e).dump() + "\n";
    last_seq = std::max(last_seq, e.seq);
    last_ts = e.ts;
  }
  Json end = Json::object();
  end["seq"] = last_seq + 1;
  end["ts"] = last_ts;
  end["event"] = "session_end";
  end["session_id"] = meta.session_id;
  end["total_events"] = fragment.events.size() + 2;
  out += end.dump() + "\n";
  return out;
}

// ---- Combined files ----

std::vector<ChainRecord> parse_combined(std::string_view text) {
  const Json doc = parse_document(text);
  if (!doc.is_object()) throw SchemaError("combined file: top level is not an object");
  if (!doc.contains("is_malicious") || !doc["is_malicious"].is_boolean()) {
    throw SchemaError("combined file: missing boolean 'is_malicious'");
  }
  if (!doc.contains("sessions") || !doc["sessions"].is_array()) {
    throw SchemaError("combined file: missing array 'sessions'");
  }
  const bool malicious = doc["is_malicious"].get<bool>();
  const Json& sessions = doc["sessions"];
  const Json* sources = nullptr;
  if (malicious) {
    if (!doc.contains("malicious_source") ||
        !doc["malicious_source"].is_array()) {
      throw SchemaError("combined file: malicious file lacks 'malicious_source'");
    }
    sources = &doc["malicious_source"];
    if (sources->size() != sessions.size()) {
      throw SchemaError("combined file: malicious_source has " +
                        std::to_string(sources->size()) + " entries for " +
                        std::to_string(sessions.size()) + " chains");
    }
  }
  const Json* chain_ids = nullptr;
  if (doc.contains("chain_ids")) {
    chain_ids = &doc["chain_ids"];
    if (!chain_ids->is_array() || chain_ids->size() != sessions.size()) {
      throw SchemaError("combined file: 'chain_ids' does not match 'sessions'");
    }
  }

  std::vector<ChainRecord> chains;
  chains.reserve(sessions.size());
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    ChainRecord chain;
    chain.is_malicious = malicious;
    if (sources) {
      const Json& src = (*sources)[i];
      if (!src.is_object()) {
        throw SchemaError("combined file: malicious_source[" +
                          std::to_string(i) + "] is not an object");
      }
      chain.run_id = opt_string(src, "run_id");
      chain.campaign = opt_string(src, "campaign");
      chain.campaign_id = opt_string(src, "campaign_id");
      chain.attack_graph_file = opt_string(src, "attack_graph_file");
      chain.style = opt_string(src, "style");
      if (src.contains("seed") && src["seed"].is_number_integer()) {
        chain.seed = src["seed"].get<std::int64_t>();
      }
      if (!chain.campaign) {
        throw SchemaError("combined file: malicious chain " +
                          std::to_string(i) + " has no campaign");
      }
      for (auto it = src.begin(); it != src.end(); ++it) {
        if (!contains(kSourceKeys, it.key())) {
          chain.source_extra[it.key()] = it.value();
        }
      }
    }
    if (chain_ids) {
      chain.chain_id = string_or_dump((*chain_ids)[i]);
    } else if (chain.run_id) {
      chain.chain_id = *chain.run_id;
    } else {
      chain.chain_id = indexed_id(malicious ? "malicious" : "benign", i);
    }

    const Json& fragments = sessions[i];
    if (!fragments.is_array()) {
      throw SchemaError("combined file: sessions[" + std::to_string(i) +
                        "] is not a list of fragments (nesting depth 1)");
    }
    for (std::size_t k = 0; k < fragments.size(); ++k) {
      const Json& uses = fragments[k];
      if (!uses.is_array()) {
        throw SchemaError("combined file: sessions[" + std::to_string(i) +
                          "][" + std::to_string(k) +
                          "] is not a list of tool uses (nesting depth 2)");
      }
      Fragment fragment;
      RecordContext ctx;
      ctx.session_id = fragment_session_id(chain.chain_id, k);
      ctx.user_id = chain.chain_id;
      for (std::size_t t = 0; t < uses.size(); ++t) {
        if (!uses[t].is_object()) {
          throw SchemaError("combined file: sessions[" + std::to_string(i) +
                            "][" + std::to_string(k) + "][" +
                            std::to_string(t) +
                            "] is not a tool-use record (nesting depth 3)");
        }
        ctx.where = "sessions[" + std::to_string(i) + "][" +
                    std::to_string(k) + "][" + std::to_string(t) + "]";
        ctx.seq = static_cast<std::int64_t>(t);
        ToolUseEvent e = decode_tool_record(uses[t], ctx);
        (e.is_call() ? ctx.calls_seen : ctx.results_seen) += 1;
        fragment.events.push_back(std::move(e));
      }
      chain.fragments.push_back(std::move(fragment));
    }
    if (sources && (*sources)[i].contains("cover_fragments")) {
      for (const auto& idx : (*sources)[i]["cover_fragments"]) {
        if (idx.is_number_integer()) {
          const auto k = idx.get<std::size_t>();
          if (k < chain.fragments.size()) chain.fragments[k].is_cover = true;
        }
      }
    }
    chains.push_back(std::move(chain));
  }
  return chains;
}

std::string emit_combined(const std::vector<ChainRecord>& chains,
                          bool is_malicious, const Json& provenance) {
  Json doc = Json::object();
  doc["is_malicious"] = is_malicious;
  Json sessions = Json::array();
  Json sources = Json::array();
  Json ids = Json::array();
  bool custom_ids = false;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const ChainRecord& chain = chains[i];
    if (chain.is_malicious != is_malicious) {
      throw UsageError("emit_combined: chain '" + chain.chain_id +
                       "' does not match the file's is_malicious flag");
    }
    Json fragments = Json::array();
    for (const auto& fragment : chain.fragments) {
      Json uses = Json::array();
      for (const auto& e : fragment.events) uses.push_back(event_to_json(e));
      fragments.push_back(std::move(uses));
    }
    sessions.push_back(std::move(fragments));

    std::string default_id =
        chain.run_id && is_malicious
            ? *chain.run_id
            : indexed_id(is_malicious ? "malicious" : "benign", i);
    if (chain.chain_id != default_id) custom_ids = true;
    ids.push_back(chain.chain_id);

    if (is_malicious) {
      Json src = Json::object();
      if (chain.run_id) src["run_id"] = *chain.run_id;
      if (chain.seed) src["seed"] = *chain.seed;
      src["campaign"] = chain.campaign.value_or("");
      if (chain.campaign_id) src["campaign_id"] = *chain.campaign_id;
      if (chain.attack_graph_file) {
        src["attack_graph_file"] = *chain.attack_graph_file;
      }
      if (chain.style) src["style"] = *chain.style;
      Json cover = Json::array();
      for (std::size_t k = 0; k < chain.fragments.size(); ++k) {
        if (chain.fragments[k].is_cover) cover.push_back(k);
      }
      if (!cover.empty()) src["cover_fragments"] = std::move(cover);
      for (auto it = chain.source_extra.begin(); it != chain.source_extra.end();
           ++it) {
        src[it.key()] = it.value();
      }
      sources.push_back(std::move(src));
    }
  }
  doc["sessions"] = std::move(sessions);
  if (is_malicious) doc["malicious_source"] = std::move(sources);
  if (custom_ids) doc["chain_ids"] = std::move(ids);
  if (!provenance.is_null()) doc["provenance"] = provenance;
  return doc.dump() + "\n";
}

// ---- Attack-graph files ----

ChainRecord parse_attack_graph(std::string_view text,
                               Diagnostics* diagnostics) {
  const Json doc = parse_document(text);
  if (!doc.is_object()) throw SchemaError("attack graph: top level is not an object");
  if (!doc.contains("variation") || !doc["variation"].is_object()) {
    throw SchemaError("attack graph: missing 'variation' block");
  }
  const Json& variation = doc["variation"];
  ChainRecord chain;
  chain.is_malicious = true;
  chain.run_id = opt_string(doc, "run_id");
  chain.campaign = opt_string(doc, "campaign");
  if (!chain.campaign) chain.campaign = opt_string(variation, "campaign");
  if (!chain.campaign) throw SchemaError("attack graph: missing 'campaign'");
  chain.style = opt_string(doc, "style");
  if (!chain.style) chain.style = opt_string(variation, "style");
  chain.campaign_id = opt_string(variation, "campaign_id");
  if (variation.contains("seed") && variation["seed"].is_number_integer()) {
    chain.seed = variation["seed"].get<std::int64_t>();
  }
  chain.chain_id = chain.run_id.value_or("attack-graph");
  const std::string user =
      opt_string(variation, "user_id").value_or(chain.chain_id);

  if (!variation.contains("fragments") || !variation["fragments"].is_array()) {
    throw SchemaError("attack graph: 'variation.fragments' is not a list");
  }
  std::vector<const Json*> ordered;
  for (const auto& f : variation["fragments"]) {
    if (!f.is_object()) throw SchemaError("attack graph: fragment is not an object");
    ordered.push_back(&f);
  }
  auto fragment_index = [](const Json* f) -> std::int64_t {
    auto it = f->find("fragment_index");
    return it != f->end() && it->is_number_integer() ? it->get<std::int64_t>()
                                                     : 0;
  };
  std::stable_sort(ordered.begin(), ordered.end(),
                   [&](const Json* a, const Json* b) {
                     return fragment_index(a) < fragment_index(b);
                   });
  if (ordered.empty() && diagnostics) {
    diagnostics->warnings.push_back("attack graph '" + chain.chain_id +
                                    "' has no fragments");
  }

  for (std::size_t k = 0; k < ordered.size(); ++k) {
    const Json& f = *ordered[k];
    Fragment fragment;
    if (auto it = f.find("is_cover"); it != f.end() && it->is_boolean()) {
      fragment.is_cover = it->get<bool>();
    }
    std::string session = opt_string(f, "session_path").value_or("");
    if (session.empty()) session = fragment_session_id(chain.chain_id, k);
    if (f.contains("tools_executed")) {
      const Json& tools = f["tools_executed"];
      if (!tools.is_array()) {
        throw SchemaError("attack graph: 'tools_executed' is not a list");
      }
      for (std::size_t t = 0; t < tools.size(); ++t) {
        const Json& entry = tools[t];
        ToolUseEvent e;
        e.kind = EventKind::ToolCall;
        e.session_id = session;
        e.user_id = user;
        e.seq = static_cast<std::int64_t>(t);
        e.call_index = static_cast<std::int64_t>(t);
        if (entry.is_array()) {
          if (entry.empty()) {
            throw SchemaError("attack graph: empty tools_executed entry");
          }
          e.tool = string_or_dump(entry[0]);
          for (std::size_t a = 1; a < entry.size(); ++a) {
            if (a > 1) e.arguments += ' ';
            e.arguments += string_or_dump(entry[a]);
          }
        } else {
          e.tool = string_or_dump(entry);
        }
        e.request_bytes = static_cast<std::int64_t>(e.arguments.size());
        fragment.events.push_back(std::move(e));
      }
    }
    chain.fragments.push_back(std::move(fragment));
  }
  return chain;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace fraggraph
