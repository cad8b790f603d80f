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

#include "fraggraph/synth_corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>

#include "fraggraph/errors.h"
#include "fraggraph/graph.h"
#include "fraggraph/rng.h"

namespace fraggraph {
namespace {

const char* const kCampaigns[] = {
    "ad_discovery",          "ai_phishing",
    "clickfix_via_ai_chat",  "coinbait",
    "coral_sleet",           "deepfake_id_fraud",
    "dprk_fraud",            "gtg1002",
    "honestcue",             "jasper_sleet",
    "london_drugs_lockbit",  "malterminal",
    "nocode_ransomware",     "ns_power_ransomware",
    "operation_false_witness", "promptflux",
    "promptsteal",           "quietvault",
    "ru_malware_clusters",   "scope_creep",
    "tycoon2fa",             "unc2970_operation_dream_job",
    "vibe_extortion",        "wormgpt_kawaiigpt"};

const char* const kTools[] = {
    "read_file",        "write_file",     "list_directory", "search_files",
    "move_file",        "copy_file",      "delete_file",    "create_directory",
    "get_file_info",    "run_command",    "run_script",     "fetch_url",
    "http_request",     "dns_lookup",     "query_database", "compress_archive",
    "extract_archive",  "send_email",     "read_email",     "calendar_lookup",
    "git_status",       "git_commit",     "render_template", "summarize_text"};

const char* const kStyles[] = {"command_form", "compliance_audit", "direct",
                               "educational",  "helpdesk",         "sysadmin"};

// Tools whose call carries a long, reusable argument template.
const char* const kTemplateTools[] = {"run_script", "render_template",
                                      "run_command", "http_request",
                                      "query_database"};

const char* const kFailures[] = {"error file not found", "error permission denied",
                                 "error invalid regex", "error no such directory"};

constexpr std::time_t kEpoch = 1772323200;  // 2026-03-01T00:00:00Z

std::string hex_token(Rng& rng, int digits) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (int i = 0; i < digits; ++i) s += kHex[rng.uniform_int(0, 15)];
  return s;
}

std::string pseudo_word(Rng& rng, int lo = 3, int hi = 9) {
  const auto n = rng.uniform_int(lo, hi);
  std::string w;
  for (std::int64_t i = 0; i < n; ++i) w += static_cast<char>('a' + rng.uniform_int(0, 25));
  return w;
}

// Random lowercase words, exactly `n` bytes.
std::string filler(Rng& rng, std::int64_t n) {
  std::string s;
  while (static_cast<std::int64_t>(s.size()) < n) {
    if (!s.empty()) s += ' ';
    s += pseudo_word(rng);
  }
  s.resize(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  return s;
}

std::string timestamp(std::int64_t offset) {
  const std::time_t t = kEpoch + offset;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::int64_t draw(Rng& rng, ByteRange r) { return rng.uniform_int(r.lo, r.hi); }

std::string make_resource(Rng& rng, int kind) {
  switch (kind % 4) {
    case 0:
      return "/srv/work/" + hex_token(rng, 10) + "/" + pseudo_word(rng) + ".dat";
    case 1:
      return "https://" + hex_token(rng, 10) + ".files.example.net/" + pseudo_word(rng);
    case 2:
      return hex_token(rng, 10) + ".svc.internal";
    default:
      return "10." + std::to_string(rng.uniform_int(0, 255)) + "." +
             std::to_string(rng.uniform_int(0, 255)) + "." +
             std::to_string(rng.uniform_int(1, 254));
  }
}

std::string fresh_path(Rng& rng) {
  return "/home/share/" + hex_token(rng, 12) + "/" + pseudo_word(rng) + ".txt";
}

struct CallSpec {
  std::string tool;
  std::string arguments;
  std::int64_t result_bytes = 0;
  std::string result_preview;
  bool success = true;
};

// Text of `head` followed by filler up to `size` bytes (never truncating
// `head`). Returns the final byte count.
std::string pad_to(Rng& rng, const std::string& head, std::int64_t size) {
  const auto room = size - static_cast<std::int64_t>(head.size()) - 1;
  if (head.empty()) return filler(rng, size);
  if (room <= 0) return head;
  return head + " " + filler(rng, room);
}

struct ChainContext {
  bool malicious = false;
  std::vector<std::string> chain_pool;  // malicious only
  std::string template_tool;
  std::vector<std::string> template_words;  // malicious only
  std::string user_id;
  std::int64_t clock = 0;
  // Fragments holding an oversized read or a large write.
  std::vector<int> oversized, large_writes;
};

class Generator {
 public:
  explicit Generator(const GeneratorConfig& config)
      : cfg_(config), rng_(config.seed) {}

  Corpus run() {
    Corpus corpus;
    std::vector<double> campaign_weights;
    for (const auto& c : cfg_.campaigns) campaign_weights.push_back(c.weight);
    for (int i = 0; i < cfg_.n_malicious; ++i) {
      ChainRecord chain;
      chain.is_malicious = true;
      const auto ci = rng_.weighted(campaign_weights);
      chain.campaign = cfg_.campaigns[ci].name;
      chain.campaign_id = campaign_id_of(cfg_.campaigns[ci].name);
      char run[48];
      std::snprintf(run, sizeof(run), "run-%05d-%s", i, hex_token(rng_, 6).c_str());
      chain.run_id = run;
      chain.chain_id = *chain.run_id;
      chain.seed = static_cast<std::int64_t>(rng_.next() >> 33);
      chain.style = cfg_.styles[rng_.uniform_int(0, cfg_.styles.size() - 1)];
      chain.attack_graph_file =
          "attack_graphs/" + *chain.campaign + "/" + *chain.run_id + ".json";
      fill_chain(chain, sample_length(cfg_.malicious_length, kMaliciousLengthMin));
      corpus.chains.push_back(std::move(chain));
    }
    for (int i = 0; i < cfg_.n_benign; ++i) {
      ChainRecord chain;
      char id[32];
      std::snprintf(id, sizeof(id), "benign-%05d", i);
      chain.chain_id = id;
      fill_chain(chain, sample_length(cfg_.benign_length, kBenignLengthMin));
      corpus.chains.push_back(std::move(chain));
    }
    corpus.labels = label_events(corpus.chains);
    return corpus;
  }

 private:
  std::string campaign_id_of(const std::string& name) const {
    for (std::size_t k = 0; k < std::size(kCampaigns); ++k) {
      if (name == kCampaigns[k]) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "C%02zu", k + 1);
        return buf;
      }
    }
    return "X-" + name;
  }

  int sample_length(const std::vector<double>& table, int lo) {
    return lo + static_cast<int>(rng_.weighted(table));
  }

  void fill_chain(ChainRecord& chain, int length) {
    ChainContext ctx;
    ctx.malicious = chain.is_malicious;
    ctx.user_id = "user-" + hex_token(rng_, 8);
    ctx.clock = rng_.uniform_int(0, 86400 * 28);
    ctx.template_tool = kTemplateTools[rng_.uniform_int(0, std::size(kTemplateTools) - 1)];
    if (ctx.malicious) {
      for (int k = 0; k < 4; ++k) ctx.chain_pool.push_back(make_resource(rng_, k));
      ctx.template_words = template_words();
    }
    // Call counts are fixed up front so per-chain byte outliers can be
    // placed on real reads and writes.
    std::vector<int> calls(length);
    for (auto& c : calls) {
      c = static_cast<int>(rng_.uniform_int(cfg_.calls_per_fragment.first,
                                            cfg_.calls_per_fragment.second));
    }
    const auto n_over = rng_.uniform_int(cfg_.bytes.oversized_reads.first,
                                         cfg_.bytes.oversized_reads.second);
    const auto n_large = rng_.uniform_int(cfg_.bytes.large_writes.first,
                                          cfg_.bytes.large_writes.second);
    // Each fragment opens with one read and closes with one write.
    for (std::int64_t i = 0; i < n_over; ++i) {
      ctx.oversized.push_back(static_cast<int>(rng_.uniform_int(0, length - 1)));
    }
    for (std::int64_t i = 0; i < n_large; ++i) {
      ctx.large_writes.push_back(static_cast<int>(rng_.uniform_int(0, length - 1)));
    }

    // Rotated chains keep only their argument template in common.
    const bool linked = ctx.malicious && !cfg_.rotate_identities;
    std::string handoff;  // artifact written by the previous fragment
    for (int k = 0; k < length; ++k) {
      const std::string input = (linked && !handoff.empty()) ? handoff : fresh_path(rng_);
      const std::string output = fresh_path(rng_);
      chain.fragments.push_back(make_fragment(ctx, k, calls[k], input, output));
      handoff = output;
    }
  }

  std::vector<std::string> template_words() {
    std::vector<std::string> words(70);
    for (auto& w : words) w = pseudo_word(rng_, 3, 7);
    return words;
  }

  // A mention drawn from the event's resource pool, or empty.
  std::string maybe_mention(const std::vector<std::string>& pool, bool malicious) {
    if (!rng_.bernoulli(malicious ? cfg_.reference_rate : cfg_.benign_reuse_rate)) return {};
    return pool[rng_.uniform_int(0, pool.size() - 1)];
  }

  Fragment make_fragment(ChainContext& ctx, int k, int n_calls,
                         const std::string& input, const std::string& output) {
    // Same pool shape for both classes; only its scope differs.
    std::vector<std::string> pool = ctx.chain_pool;
    if (!ctx.malicious || cfg_.rotate_identities) {
      pool.clear();
      for (int kind = 0; kind < 4; ++kind) pool.push_back(make_resource(rng_, kind));
    }
    const bool oversized = std::count(ctx.oversized.begin(), ctx.oversized.end(), k) > 0;
    const bool large_write =
        std::count(ctx.large_writes.begin(), ctx.large_writes.end(), k) > 0;
    std::vector<CallSpec> specs;
    {
      CallSpec read;
      read.tool = "read_file";
      read.arguments = pad_to(rng_, "path " + input, draw(rng_, cfg_.bytes.call_arguments));
      read.result_bytes = draw(rng_, oversized ? cfg_.bytes.oversized_read
                                               : cfg_.bytes.read_result);
      specs.push_back(std::move(read));
    }
    {
      CallSpec tmpl;
      tmpl.tool = ctx.template_tool;
      tmpl.arguments = template_text(ctx);
      tmpl.result_bytes = draw(rng_, cfg_.bytes.result);
      specs.push_back(std::move(tmpl));
    }
    for (int i = 0; i < n_calls - 3; ++i) {
      CallSpec call;
      call.tool = cfg_.tool_catalogue[rng_.uniform_int(0, cfg_.tool_catalogue.size() - 1)];
      call.arguments = pad_to(rng_, maybe_mention(pool, ctx.malicious), draw(rng_, cfg_.bytes.call_arguments));
      call.result_bytes = draw(rng_, call.tool == "read_file" ? cfg_.bytes.read_result
                                                              : cfg_.bytes.result);
      specs.push_back(std::move(call));
    }
    {
      CallSpec write;
      write.tool = "write_file";
      write.arguments = pad_to(rng_, "path " + output,
                               draw(rng_, large_write ? cfg_.bytes.large_write
                                                      : cfg_.bytes.write_arguments));
      write.result_bytes = draw(rng_, cfg_.bytes.failure_result);
      specs.push_back(std::move(write));
    }
    for (auto& s : specs) {
      s.result_preview = preview(maybe_mention(pool, ctx.malicious), s.result_bytes);
    }
    if (rng_.bernoulli(cfg_.noise_rate)) {
      // A failed attempt with a wrong path, recovered by the original call.
      const auto at = rng_.uniform_int(0, specs.size() - 1);
      CallSpec failed;
      failed.tool = specs[at].tool;
      const std::string wrong = fresh_path(rng_);
      failed.arguments = pad_to(rng_, "path " + wrong, draw(rng_, cfg_.bytes.call_arguments));
      failed.success = false;
      failed.result_bytes = draw(rng_, cfg_.bytes.failure_result);
      failed.result_preview = preview(
          std::string(kFailures[rng_.uniform_int(0, std::size(kFailures) - 1)]) + " " + wrong,
          failed.result_bytes);
      specs.insert(specs.begin() + at, std::move(failed));
    }

    Fragment fragment;
    const std::string session_id = "sess-" + hex_token(rng_, 12);
    const std::string user_id =
        (ctx.malicious && cfg_.rotate_identities) ? "user-" + hex_token(rng_, 8) : ctx.user_id;
    std::int64_t seq = 1;
    ctx.clock += rng_.uniform_int(600, 7200);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const CallSpec& s = specs[i];
      for (int half = 0; half < 2; ++half) {
        ToolUseEvent e;
        e.user_id = user_id;
        e.session_id = session_id;
        e.seq = seq;
        seq += rng_.bernoulli(0.03) ? 2 : 1;
        e.iteration = static_cast<std::int64_t>(i) + 1;
        e.tool = s.tool;
        ctx.clock += rng_.uniform_int(1, 20);
        e.ts = timestamp(ctx.clock);
        if (half == 0) {
          e.kind = EventKind::ToolCall;
          e.arguments = s.arguments;
          e.request_bytes = static_cast<std::int64_t>(s.arguments.size());
          e.call_index = static_cast<std::int64_t>(i);
        } else {
          e.kind = EventKind::ToolResult;
          e.arguments = s.result_preview;
          e.success = s.success;
          e.response_bytes = s.result_bytes;
          e.result_index = static_cast<std::int64_t>(i);
        }
        fragment.events.push_back(std::move(e));
      }
    }
    return fragment;
  }

  std::string preview(const std::string& mention, std::int64_t bytes) {
    return pad_to(rng_, mention, std::min(bytes, cfg_.preview_limit));
  }

  // Malicious chains reuse one word list with two randomized names per
  // fragment; benign sessions draw a fresh list each time, so only the
  // malicious near-duplicates cross sessions.
  std::string template_text(const ChainContext& ctx) {
    const std::vector<std::string> words =
        ctx.malicious ? ctx.template_words : template_words();
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) out += ' ';
      out += words[i];
      if (i == 20 || i == 45) out += "_" + pseudo_word(rng_, 4, 6);
    }
    return out;
  }

  const GeneratorConfig& cfg_;
  Rng rng_;
};

std::pair<double, double> ks_and_accuracy(std::vector<double> pos,
                                          std::vector<double> neg) {
  if (pos.empty() || neg.empty()) return {0.0, 0.5};
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> cuts(pos);
  cuts.insert(cuts.end(), neg.begin(), neg.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double ks = 0, best = 0.5;
  for (double t : cuts) {
    // Fractions at or below t.
    const double fp = static_cast<double>(std::upper_bound(pos.begin(), pos.end(), t) -
                                          pos.begin()) / pos.size();
    const double fn = static_cast<double>(std::upper_bound(neg.begin(), neg.end(), t) -
                                          neg.begin()) / neg.size();
    ks = std::max(ks, std::abs(fp - fn));
    // Predict positive above t, or below it.
    const double above = 0.5 * ((1.0 - fp) + fn);
    best = std::max({best, above, 1.0 - above});
  }
  return {ks, best};
}

}  // namespace

GeneratorConfig GeneratorConfig::defaults() {
  GeneratorConfig c;
  for (const char* name : kCampaigns) {
    // The dream-job campaign is deliberately sparse.
    const double w = std::string_view(name) == "unc2970_operation_dream_job" ? 0.25 : 1.0;
    c.campaigns.push_back({name, w});
  }
  for (const char* t : kTools) c.tool_catalogue.emplace_back(t);
  for (const char* s : kStyles) c.styles.emplace_back(s);
  // Mode and median 8.
  c.malicious_length = {4, 6, 9, 12, 20, 10, 8, 7, 6, 5, 4, 3, 2};
  // 7..14, most mass on 8.
  c.benign_length = {10, 35, 12, 11, 10, 9, 7, 6};
  return c;
}

void GeneratorConfig::validate() const {
  if (n_malicious < 0 || n_benign < 0) throw UsageError("chain counts must be >= 0");
  if (!(noise_rate >= 0 && noise_rate <= 1)) throw UsageError("noise_rate must be in [0, 1]");
  if (!(reference_rate >= 0 && reference_rate <= 1) ||
      !(benign_reuse_rate >= 0 && benign_reuse_rate <= 1)) {
    throw UsageError("reference rates must be in [0, 1]");
  }
  if (malicious_length.size() != kMaliciousLengthMax - kMaliciousLengthMin + 1) {
    throw UsageError("malicious_length needs 13 weights (lengths 4..16)");
  }
  if (benign_length.size() != kBenignLengthMax - kBenignLengthMin + 1) {
    throw UsageError("benign_length needs 8 weights (lengths 7..14)");
  }
  for (const auto* table : {&malicious_length, &benign_length}) {
    double total = 0;
    for (double w : *table) {
      if (w < 0) throw UsageError("length weights must be >= 0");
      total += w;
    }
    if (!(total > 0)) throw UsageError("length weights must not all be zero");
  }
  if (n_malicious > 0 && campaigns.empty()) throw UsageError("no campaigns configured");
  if (n_malicious > 0 && styles.empty()) throw UsageError("no styles configured");
  if (tool_catalogue.empty()) throw UsageError("tool_catalogue must not be empty");
  for (auto p : {bytes.oversized_reads, bytes.large_writes}) {
    if (p.first < 0 || p.second < p.first) throw UsageError("bad per-chain count range");
  }
  if (calls_per_fragment.first < 3 || calls_per_fragment.second < calls_per_fragment.first) {
    throw UsageError("calls_per_fragment must be a range starting at >= 3");
  }
  for (auto r : {bytes.read_result, bytes.oversized_read, bytes.write_arguments,
                 bytes.large_write, bytes.call_arguments, bytes.result,
                 bytes.failure_result}) {
    if (r.lo < 0 || r.hi < r.lo) throw UsageError("bad byte range");
  }
  if (preview_limit < 0) throw UsageError("preview_limit must be >= 0");
}

namespace {

Json range_json(ByteRange r) { return Json::array({r.lo, r.hi}); }
ByteRange range_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw UsageError("byte range must be [lo, hi]");
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}
Json pair_json(std::pair<int, int> p) { return Json::array({p.first, p.second}); }
std::pair<int, int> pair_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw UsageError("range must be [lo, hi]");
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

Json GeneratorConfig::to_json() const {
  Json j = Json::object();
  j["seed"] = seed;
  j["n_malicious"] = n_malicious;
  j["n_benign"] = n_benign;
  Json camps = Json::array();
  for (const auto& c : campaigns) camps.push_back(Json::array({c.name, c.weight}));
  j["campaigns"] = std::move(camps);
  j["tool_catalogue"] = tool_catalogue;
  j["styles"] = styles;
  j["noise_rate"] = noise_rate;
  j["malicious_length"] = malicious_length;
  j["benign_length"] = benign_length;
  Json b = Json::object();
  b["read_result"] = range_json(bytes.read_result);
  b["oversized_read"] = range_json(bytes.oversized_read);
  b["write_arguments"] = range_json(bytes.write_arguments);
  b["large_write"] = range_json(bytes.large_write);
  b["call_arguments"] = range_json(bytes.call_arguments);
  b["result"] = range_json(bytes.result);
  b["failure_result"] = range_json(bytes.failure_result);
  b["oversized_reads"] = pair_json(bytes.oversized_reads);
  b["large_writes"] = pair_json(bytes.large_writes);
  j["bytes"] = std::move(b);
  j["calls_per_fragment"] = pair_json(calls_per_fragment);
  j["reference_rate"] = reference_rate;
  j["benign_reuse_rate"] = benign_reuse_rate;
  j["rotate_identities"] = rotate_identities;
  j["preview_limit"] = preview_limit;
  return j;
}

GeneratorConfig GeneratorConfig::from_json(const Json& j) {
  if (!j.is_object()) throw UsageError("generator config must be an object");
  GeneratorConfig c = defaults();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "n_malicious") c.n_malicious = v.get<int>();
    else if (k == "n_benign") c.n_benign = v.get<int>();
    else if (k == "campaigns") {
      c.campaigns.clear();
      for (const auto& e : v) {
        if (e.is_string()) c.campaigns.push_back({e.get<std::string>(), 1.0});
        else c.campaigns.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
      }
    } else if (k == "tool_catalogue") c.tool_catalogue = v.get<std::vector<std::string>>();
    else if (k == "styles") c.styles = v.get<std::vector<std::string>>();
    else if (k == "noise_rate") c.noise_rate = v.get<double>();
    else if (k == "malicious_length") c.malicious_length = v.get<std::vector<double>>();
    else if (k == "benign_length") c.benign_length = v.get<std::vector<double>>();
    else if (k == "bytes") {
      for (auto b = v.begin(); b != v.end(); ++b) {
        const auto& bk = b.key();
        if (bk == "read_result") c.bytes.read_result = range_from(b.value());
        else if (bk == "oversized_read") c.bytes.oversized_read = range_from(b.value());
        else if (bk == "write_arguments") c.bytes.write_arguments = range_from(b.value());
        else if (bk == "large_write") c.bytes.large_write = range_from(b.value());
        else if (bk == "call_arguments") c.bytes.call_arguments = range_from(b.value());
        else if (bk == "result") c.bytes.result = range_from(b.value());
        else if (bk == "failure_result") c.bytes.failure_result = range_from(b.value());
        else if (bk == "oversized_reads") c.bytes.oversized_reads = pair_from(b.value());
        else if (bk == "large_writes") c.bytes.large_writes = pair_from(b.value());
        else throw UsageError("unknown generator.bytes key '" + bk + "'");
      }
    } else if (k == "calls_per_fragment") c.calls_per_fragment = pair_from(v);
    else if (k == "reference_rate") c.reference_rate = v.get<double>();
    else if (k == "benign_reuse_rate") c.benign_reuse_rate = v.get<double>();
    else if (k == "rotate_identities") c.rotate_identities = v.get<bool>();
    else if (k == "preview_limit") c.preview_limit = v.get<std::int64_t>();
    else throw UsageError("unknown generator key '" + k + "'");
  }
  c.validate();
  return c;
}

std::vector<ChainRecord> Corpus::malicious() const {
  std::vector<ChainRecord> out;
  for (const auto& c : chains) {
    if (c.is_malicious) out.push_back(c);
  }
  return out;
}

std::vector<ChainRecord> Corpus::benign() const {
  std::vector<ChainRecord> out;
  for (const auto& c : chains) {
    if (!c.is_malicious) out.push_back(c);
  }
  return out;
}

Corpus generate(const GeneratorConfig& config) {
  config.validate();
  return Generator(config).run();
}

CombinedFiles emit_corpus(const Corpus& corpus, const Json& provenance) {
  return {emit_combined(corpus.malicious(), true, provenance),
          emit_combined(corpus.benign(), false, provenance)};
}

Corpus load_corpus(std::string_view malicious_text, std::string_view benign_text,
                   const LabelPolicy& policy) {
  Corpus corpus;
  if (!malicious_text.empty()) corpus.chains = parse_combined(malicious_text);
  if (!benign_text.empty()) {
    auto benign = parse_combined(benign_text);
    for (auto& c : benign) corpus.chains.push_back(std::move(c));
  }
  corpus.labels = label_events(corpus.chains, policy);
  return corpus;
}

std::vector<std::string> own_block_names(const ToolVocabulary& vocabulary) {
  std::vector<std::string> names = {
      "is_tool_call",   "is_tool_result", "success",    "seq",
      "iteration",      "request_bytes",  "response_bytes",
      "call_index",     "result_index"};
  for (const auto& t : vocabulary.tools()) names.push_back("tool=" + t);
  return names;
}

Json AuditReport::to_json() const {
  Json j = Json::object();
  j["max_accuracy"] = max_accuracy;
  j["worst_dim"] = worst_dim;
  Json dims_j = Json::array();
  for (const auto& d : dims) {
    Json e = Json::object();
    e["dim"] = d.dim;
    e["name"] = d.name;
    e["ks"] = d.ks;
    e["accuracy"] = d.accuracy;
    dims_j.push_back(std::move(e));
  }
  j["dims"] = std::move(dims_j);
  return j;
}

AuditReport separability_audit(const Matrix& raw, std::span<const int> y) {
  if (raw.rows() != static_cast<Eigen::Index>(y.size())) {
    throw UsageError("audit: labels do not match feature rows");
  }
  AuditReport report;
  for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(kOwnBlockDims); ++d) {
    std::vector<double> pos, neg;
    for (Eigen::Index r = 0; r < raw.rows(); ++r) (y[r] ? pos : neg).push_back(raw(r, d));
    const auto [ks, acc] = ks_and_accuracy(std::move(pos), std::move(neg));
    report.dims.push_back(DimAudit{static_cast<int>(d), "", ks, acc});
    if (acc > report.max_accuracy) {
      report.max_accuracy = acc;
      report.worst_dim = static_cast<int>(d);
    }
  }
  return report;
}

AuditReport separability_audit(const Corpus& corpus) {
  const EventStream stream = flatten(corpus.chains);
  const InteractionGraph graph = build_graph(stream.events);
  const ToolVocabulary vocab = build_vocabulary(stream.events);
  std::vector<int> y;
  for (const auto& l : corpus.labels) y.push_back(l.y);
  AuditReport report = separability_audit(encode(graph, vocab), y);
  const auto names = own_block_names(vocab);
  for (auto& d : report.dims) d.name = names[d.dim];
  return report;
}

}  // namespace fraggraph
