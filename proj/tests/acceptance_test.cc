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


// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Runs the full default pipeline twice,
// so expect a few minutes on one core.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fraggraph/chain_discovery.h"
#include "fraggraph/cli.h"
#include "fraggraph/detectors.h"
#include "fraggraph/evaluator.h"
#include "fraggraph/event_model.h"
#include "fraggraph/features.h"
#include "fraggraph/graph.h"
#include "fraggraph/rng.h"
#include "fraggraph/simhash.h"
#include "fraggraph/synth_corpus.h"
#include "oracles.h"
#include "test_util.h"

namespace fraggraph {
namespace {

namespace fs = std::filesystem;
using testing::call;
using testing::numbered;
using testing::result;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Checks accumulate into the first failure message.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failure_.empty()) failure_ = what;
  }
  bool ok() const { return failure_.empty(); }
  Outcome done(const std::string& summary) const {
    return ok() ? Outcome{true, summary} : Outcome{false, failure_};
  }

 private:
  std::string failure_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---- AC1 ----

Outcome layout() {
  Checker c;
  c.expect(kOwnBlockDims == 29, "own block is not 29 wide");
  c.expect(kPanelDims == 23, "panel is not 23 wide");
  c.expect(kFeatureDims == 121, "feature vector is not 121 wide");
  const std::size_t expected_offsets[] = {29, 52, 75, 98};
  for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
    c.expect(feature_layout::panel_offset(kAllEdgeTypes[t]) == expected_offsets[t],
             std::string("panel offset of ") + edge_type_name(kAllEdgeTypes[t]));
  }

  // Two sessions touching one path, a failed write, and a near-duplicate
  // argument, so every structural type has an edge.
  const std::string long_args =
      "render quarterly summary for the staging cluster using template alpha "
      "with the usual header block and footer notes";
  const auto events = numbered({
      call("s1", 1, "read_file", "path /srv/data/a.dat", 0),
      result("s1", 2, "read_file", "contents of /srv/data/a.dat", 0),
      call("s1", 3, "render_template", long_args, 1),
      result("s1", 4, "render_template", "done", 1),
      call("s2", 1, "write_file", "path /srv/data/a.dat", 0),
      result("s2", 2, "write_file", "permission denied", 0, false),
      call("s2", 3, "render_template", long_args + " v2", 1),
      result("s2", 4, "render_template", "done", 1),
  });
  const InteractionGraph graph = build_graph(events);
  const ToolVocabulary vocab = build_vocabulary(events);
  const Matrix x = encode(graph, vocab);
  c.expect(x.rows() == static_cast<Eigen::Index>(events.size()), "row count");
  c.expect(x.cols() == static_cast<Eigen::Index>(kFeatureDims), "column count");
  for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
    c.expect(graph.edge_count(kAllEdgeTypes[t]) > 0,
             std::string("fixture lacks ") + edge_type_name(kAllEdgeTypes[t]));
  }

  // Recompute every panel from the edge list.
  namespace fl = feature_layout;
  for (std::size_t v = 0; v < events.size(); ++v) {
    c.expect(x(v, fl::kIsToolCall) == (events[v].is_call() ? 1.0 : 0.0), "is_tool_call");
    const int slot = vocab.index_of(events[v].tool);
    for (std::size_t k = 0; k < kVocabularySize; ++k) {
      c.expect(x(v, fl::kToolOneHot + k) == (static_cast<int>(k) == slot ? 1.0 : 0.0),
               "tool one-hot");
    }
    for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
      const EdgeType type = kAllEdgeTypes[t];
      std::vector<double> panel(kPanelDims, 0.0);
      std::set<std::string> tools;
      for (const auto& e : graph.edges()) {
        if (e.etype != type || e.dst != static_cast<std::int64_t>(v)) continue;
        const auto& nb = events[e.src];
        panel[fl::kInDegree] += 1;
        const int s = vocab.index_of(nb.tool);
        if (s >= 0) panel[fl::kToolHistogram + s] += 1;
        tools.insert(nb.tool);
        if (!nb.success) panel[fl::kFailedNeighbours] += 1;
      }
      panel[fl::kDistinctTools] = static_cast<double>(tools.size());
      const auto base = fl::panel_offset(type);
      for (std::size_t k = 0; k < kPanelDims; ++k) {
        c.expect(x(v, base + k) == panel[k], "panel " + std::string(edge_type_name(type)) +
                                                 " of event " + std::to_string(v));
      }
    }
  }

  // And on generated data.
  GeneratorConfig g = GeneratorConfig::defaults();
  g.n_malicious = 5;
  g.n_benign = 5;
  const EventStream stream = flatten(generate(g).chains);
  const Matrix big = encode(build_graph(stream.events), build_vocabulary(stream.events));
  c.expect(big.cols() == 121 && big.rows() == static_cast<Eigen::Index>(stream.events.size()),
           "generated corpus encoding shape");
  return c.done("121 dims = 29 + 4 x 23; panels match the edge list on " +
                std::to_string(events.size()) + " fixture events");
}

// ---- AC2 ----

Outcome gradients() {
  Checker c;
  const GradcheckFixture fixture = make_gradcheck_fixture(42);
  const RunConfig rc;
  std::string summary;
  for (auto variant : {DetectorVariant::GCN, DetectorVariant::SAGE, DetectorVariant::GAT,
                       DetectorVariant::GIN, DetectorVariant::MLP}) {
    const DetectorModel model = init_model(rc.detector.config_for(variant));
    const GradcheckReport r =
        gradcheck(model, fixture.graph, fixture.features, fixture.labels);
    c.expect(r.max_relative_error < 1e-4,
             std::string(variant_name(variant)) + " max relative error " +
                 fmt("%.3e", r.max_relative_error));
    summary += std::string(summary.empty() ? "" : ", ") + variant_name(variant) + " " +
               fmt("%.1e", r.max_relative_error);
  }
  c.expect(fixture.graph.node_count() <= 12, "fixture larger than 12 nodes");
  return c.done("max relative error: " + summary);
}

// ---- AC3 ----

Outcome union_find() {
  Checker c;
  Rng rng(2026);
  std::size_t merges = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 200));
    const auto edges = testing::random_edges(rng, n, rng.uniform_int(0, 2 * n));
    const DiscoveryConfig cfg{static_cast<double>(rng.uniform_int(1, 8)) / 8.0,
                              static_cast<int>(rng.uniform_int(1, 4))};
    UnionFind uf(n, cfg);
    for (const auto& e : edges) merges += uf.observe_edge(e) == MergeDecision::Merged;
    testing::Partition got;
    for (const auto& chain : components(uf)) got.push_back(chain.members);
    std::sort(got.begin(), got.end());
    c.expect(got == testing::fixpoint_oracle(n, edges, cfg),
             "stream " + std::to_string(trial) + " differs from the closure");
  }
  return c.done("100 streams equal the closure oracle (" + std::to_string(merges) +
                " merges)");
}

// ---- AC4 ----

Outcome lsh() {
  Checker c;
  // Random pairs at distance <= 3 must share a band.
  Rng rng(404);
  for (int i = 0; i < 200000; ++i) {
    const std::uint64_t a = rng.next();
    std::uint64_t b = a;
    const int flips = static_cast<int>(rng.uniform_int(0, 3));
    for (int f = 0; f < flips; ++f) b ^= std::uint64_t{1} << rng.uniform_int(0, 63);
    const auto ba = lsh_bands(a), bb = lsh_bands(b);
    bool shared = false;
    for (int k = 0; k < kLshBands; ++k) shared = shared || ba[k] == bb[k];
    c.expect(shared, "pair at distance <= 3 shares no band");
  }

  // On 500 real events with no link cap: the graph's similarity edges are
  // exactly the band candidates within kappa.
  GeneratorConfig g = GeneratorConfig::defaults();
  g.n_malicious = 12;
  g.n_benign = 6;
  auto events = flatten(generate(g).chains).events;
  c.expect(events.size() >= 500, "generated fewer than 500 events");
  events.resize(500);
  RobustnessConfig rc;
  rc.max_similarity_links = 1 << 20;
  const InteractionGraph graph = build_graph(events, rc);
  std::set<std::pair<std::int64_t, std::int64_t>> linked;
  for (const auto& e : graph.edges()) {
    if (e.etype == EdgeType::ArgumentSimilarity) linked.emplace(e.src, e.dst);
  }
  std::vector<std::uint64_t> sketch(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) sketch[i] = simhash64(events[i].arguments);
  std::size_t near3 = 0, found3 = 0, near8 = 0, found8 = 0;
  for (std::size_t j = 0; j < events.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      const int h = hamming(sketch[i], sketch[j]);
      const bool hit = linked.count({static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)});
      if (h <= 3) {
        ++near3;
        found3 += hit;
      }
      if (h <= rc.kappa) {
        ++near8;
        found8 += hit;
      }
    }
  }
  c.expect(found3 == near3, "a pair at distance <= 3 was not linked");
  c.expect(linked.size() == found8, "similarity edge outside kappa");
  const double recall = near8 ? static_cast<double>(found8) / near8 : 1.0;
  std::printf("  AC4 log: 500 events, %zu pairs at <= 3 (all linked), candidate recall at <= %d: "
              "%zu/%zu = %.3f\n",
              near3, rc.kappa, found8, near8, recall);
  return c.done("pigeonhole holds on 200000 random pairs and " + std::to_string(near3) +
                " real pairs; recall at <= 8 = " + fmt("%.3f", recall));
}

// ---- pipeline runs shared by AC5, AC6 and AC8 ----

struct PipelineRun {
  fs::path dir;
  bool ok = false;
  std::string log;
};

PipelineRun run_pipeline(const fs::path& dir) {
  PipelineRun run;
  run.dir = dir;
  fs::remove_all(dir);
  const std::vector<std::string> where = {
      "-o", dir.string(), "--malicious", (dir / "corpus/malicious.json").string(),
      "--benign", (dir / "corpus/benign.json").string()};
  const std::vector<std::vector<std::string>> steps = {
      {"gen"}, {"build"}, {"train-eval", "--variants", "gcn,mlp"}, {"audit"}};
  for (auto step : steps) {
    step.insert(step.end(), where.begin(), where.end());
    std::ostringstream out, err;
    const int code = run_cli(step, out, err);
    run.log += out.str() + err.str();
    if (code != kExitOk) {
      run.log += step.front() + " exited with " + std::to_string(code) + "\n";
      return run;
    }
  }
  run.ok = true;
  return run;
}

std::vector<double> read_p(const fs::path& csv) {
  const auto preds = read_predictions(read_text_file(csv.string()));
  std::vector<double> p(preds.size());
  for (const auto& pr : preds) p.at(pr.event_id) = pr.p;
  return p;
}

struct Counts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double f1() const {
    return tp ? 2.0 * tp / static_cast<double>(2 * tp + fp + fn) : 0.0;
  }
  double accuracy() const {
    return static_cast<double>(tp + tn) / static_cast<double>(tp + fp + tn + fn);
  }
  void add(double p, int y) {
    const bool hit = p >= 0.5;
    if (y) (hit ? tp : fn)++;
    else (hit ? fp : tn)++;
  }
};

bool is_round3(double v) {
  return std::abs(v * 1000.0 - std::round(v * 1000.0)) < 1e-6;
}

// ---- AC5 ----

Outcome separation(const PipelineRun& run) {
  Checker c;
  if (!run.ok) return {false, "pipeline failed: " + run.log};
  const Corpus corpus = load_corpus(read_text_file((run.dir / "corpus/malicious.json").string()),
                                    read_text_file((run.dir / "corpus/benign.json").string()));
  const SplitAssignment split = stratified_split(corpus.chains, 42, 0.7);
  const Json report = Json::parse(read_text_file((run.dir / "report.json").string()));
  std::map<std::string, double> f1;
  for (const char* model : {"gcn", "mlp"}) {
    const auto p = read_p(run.dir / "predictions" / (std::string(model) + ".csv"));
    c.expect(p.size() == corpus.labels.size(), "prediction count");
    if (!c.ok()) break;
    Counts counts;
    for (auto r : split.test_rows) counts.add(p[r], corpus.labels[r].y);
    f1[model] = counts.f1();
    for (const auto& m : report["models"]) {
      if (m["model"] != model) continue;
      c.expect(std::abs(m["aggregate"]["f1"].get<double>() - counts.f1()) <= 5e-4,
               std::string(model) + " report F1 differs from the recount");
      c.expect(m["aggregate"]["tp"].get<std::int64_t>() == counts.tp,
               std::string(model) + " report tp differs from the recount");
    }
  }
  const Json audit = Json::parse(read_text_file((run.dir / "audit.json").string()));
  const double audit_max = audit["max_accuracy"].get<double>();
  c.expect(f1["gcn"] >= 0.85, "GCN F1 " + fmt("%.3f", f1["gcn"]) + " < 0.85");
  c.expect(f1["gcn"] >= f1["mlp"], "GCN F1 " + fmt("%.3f", f1["gcn"]) + " < MLP F1 " +
                                       fmt("%.3f", f1["mlp"]));
  c.expect(audit_max <= 0.65, "single-feature audit " + fmt("%.3f", audit_max) + " > 0.65");
  return c.done("GCN F1 " + fmt("%.3f", f1["gcn"]) + " >= 0.85 and >= MLP F1 " +
                fmt("%.3f", f1["mlp"]) + "; audit max " + fmt("%.3f", audit_max) + " <= 0.65");
}

// ---- AC6 ----

Outcome determinism(const PipelineRun& a, const PipelineRun& b) {
  Checker c;
  if (!a.ok || !b.ok) return {false, "pipeline failed: " + a.log + b.log};
  const char* files[] = {"corpus/malicious.json", "corpus/benign.json", "graph.snap",
                         "chains.jsonl", "models/gcn.json", "models/mlp.json",
                         "predictions/gcn.csv", "predictions/mlp.csv", "report.json",
                         "report.txt", "audit.json"};
  for (const char* f : files) {
    c.expect(read_text_file((a.dir / f).string()) == read_text_file((b.dir / f).string()),
             std::string(f) + " differs between runs");
  }
  return c.done(std::to_string(std::size(files)) + " artifacts byte-identical across two runs");
}

// ---- AC7 ----

Outcome schema() {
  Checker c;
  GeneratorConfig g = GeneratorConfig::defaults();
  g.n_malicious = 10;
  g.n_benign = 10;
  const Corpus corpus = generate(g);
  const CombinedFiles files = emit_corpus(corpus, Json{{"seed", 42}});
  const auto mal = parse_combined(files.malicious);
  const auto ben = parse_combined(files.benign);
  c.expect(mal == corpus.malicious(), "malicious chains differ after parse");
  c.expect(ben == corpus.benign(), "benign chains differ after parse");
  const Corpus back = load_corpus(files.malicious, files.benign);
  const CombinedFiles again = emit_corpus(back, Json{{"seed", 42}});
  c.expect(again.malicious == files.malicious && again.benign == files.benign,
           "emit after parse is not byte-identical");

  const std::string golden = read_text_file(testing::data_path("golden_session.jsonl"));
  const SessionLog log = parse_session_log(std::string_view(golden));
  std::set<std::string> kinds;
  std::istringstream lines(golden);
  std::size_t records = 0, tool_records = 0;
  for (std::string line; std::getline(lines, line);) {
    if (line.empty()) continue;
    const std::string kind = Json::parse(line)["event"];
    kinds.insert(kind);
    ++records;
    tool_records += kind == "tool_call" || kind == "tool_result";
  }
  for (const char* kind : {"session_start", "toolkits_connected", "user_query",
                           "iteration_start", "llm_response_received", "assistant_response",
                           "tool_call", "tool_result", "verdict", "session_end"}) {
    c.expect(kinds.count(kind), std::string("golden fixture lacks ") + kind);
  }
  c.expect(log.events.size() == tool_records, "tool events parsed from the golden fixture");
  c.expect(log.events.size() + log.skipped == records, "every golden record is counted");
  return c.done("parse/emit identity on 20 chains; golden log with " +
                std::to_string(kinds.size()) + " event types parsed (" +
                std::to_string(log.events.size()) + " tool events, " +
                std::to_string(log.skipped) + " skipped)");
}

// ---- AC8 ----

Outcome report_shape(const PipelineRun& run) {
  Checker c;
  if (!run.ok) return {false, "pipeline failed: " + run.log};
  const Corpus corpus = load_corpus(read_text_file((run.dir / "corpus/malicious.json").string()),
                                    read_text_file((run.dir / "corpus/benign.json").string()));
  const SplitAssignment split = stratified_split(corpus.chains, 42, 0.7);
  std::set<std::string> present;
  for (const auto& chain : corpus.chains) {
    if (chain.campaign) present.insert(*chain.campaign);
  }
  std::map<std::string, std::int64_t> positives;
  for (auto r : split.test_rows) {
    if (corpus.labels[r].y) ++positives[*corpus.labels[r].campaign];
  }
  const Json report = Json::parse(read_text_file((run.dir / "report.json").string()));
  const std::string text = read_text_file((run.dir / "report.txt").string());
  std::size_t sparse = 0;
  for (const auto& m : report["models"]) {
    const auto p = read_p(run.dir / "predictions" / (m["model"].get<std::string>() + ".csv"));
    std::set<std::string> rows;
    for (const auto& row : m["campaigns"]) {
      const std::string name = row["campaign"];
      rows.insert(name);
      c.expect(is_round3(row["f1"].get<double>()) && is_round3(row["accuracy"].get<double>()),
               name + " not rounded to three decimals");
      c.expect(row["positives"].get<std::int64_t>() == positives[name],
               name + " positive count");
      const bool flag = positives[name] < 20;
      c.expect(row["sparse"].get<bool>() == flag, name + " sparse flag");
      // Rows: this campaign's positives plus every benign test event.
      Counts counts;
      for (auto r : split.test_rows) {
        const auto& l = corpus.labels[r];
        if (l.y && l.campaign != name) continue;
        counts.add(p[r], l.y);
      }
      c.expect(std::abs(row["f1"].get<double>() - counts.f1()) <= 5e-4, name + " F1 recount");
      c.expect(std::abs(row["accuracy"].get<double>() - counts.accuracy()) <= 5e-4,
               name + " accuracy recount");
      if (flag) {
        ++sparse;
        c.expect(text.find("\n" + name + "*") != std::string::npos,
                 name + " not starred in the text report");
      }
    }
    c.expect(rows == present, "campaign rows differ from the campaigns present");
  }
  c.expect(text.find("Aggregate") != std::string::npos, "text report lacks the aggregate row");
  return c.done(std::to_string(present.size()) + " campaigns x " +
                std::to_string(report["models"].size()) + " models, " +
                std::to_string(sparse) + " sparse rows flagged");
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace
}  // namespace fraggraph

int main() {
  using namespace fraggraph;
  const fs::path root =
      fs::temp_directory_path() / ("fraggraph_acceptance_" + std::to_string(::getpid()));
  int failures = 0;
  auto report = [&](const char* id, const char* name, const Outcome& o) {
    std::printf("[%s] %s %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  report("AC1", "feature layout", guarded(layout));
  report("AC2", "gradient correctness", guarded(gradients));
  report("AC3", "union-find oracle", guarded(union_find));
  report("AC4", "LSH soundness", guarded(lsh));
  PipelineRun a, b;
  const Outcome pipelines = guarded([&] {
    a = run_pipeline(root / "a");
    b = run_pipeline(root / "b");
    return Outcome{a.ok && b.ok, a.log + b.log};
  });
  if (!pipelines.pass) std::printf("pipeline log:\n%s\n", pipelines.detail.c_str());
  report("AC5", "end-to-end separation", guarded([&] { return separation(a); }));
  report("AC6", "determinism", guarded([&] { return determinism(a, b); }));
  report("AC7", "schema fidelity", guarded(schema));
  report("AC8", "per-campaign report", guarded([&] { return report_shape(a); }));
  std::error_code ec;
  fs::remove_all(root, ec);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures ? 1 : 0;
}
