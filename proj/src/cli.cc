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

#include "fraggraph/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>

#include "fraggraph/chain_discovery.h"
#include "fraggraph/errors.h"
#include "fraggraph/evaluator.h"
#include "fraggraph/hashing.h"

namespace fraggraph {
namespace {

namespace fs = std::filesystem;

std::string out_path(const RunConfig& c, const std::string& name) {
  return (fs::path(c.paths.output_dir) / name).string();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_artifact(const std::string& path, std::string_view text) {
  const fs::path p(path);
  if (p.has_parent_path()) ensure_dir(p.parent_path());
  write_text_file(path, text);
}

struct LoadedCorpus {
  Corpus corpus;
  EventStream stream;
  std::string hash;
};

LoadedCorpus load_configured_corpus(const RunConfig& c) {
  LoadedCorpus lc;
  const std::string mal = read_text_file(c.paths.malicious);
  const std::string ben = read_text_file(c.paths.benign);
  LabelPolicy policy;
  policy.cover_as_malicious = c.eval.cover_as_malicious;
  lc.corpus = load_corpus(mal, ben, policy);
  lc.stream = flatten(lc.corpus.chains);
  lc.hash = hex64(fnv1a64(ben, fnv1a64(mal)));
  return lc;
}

std::vector<std::optional<std::string>> campaigns_of(const Corpus& corpus) {
  std::vector<std::optional<std::string>> out;
  for (const auto& l : corpus.labels) out.push_back(l.y ? l.campaign : std::nullopt);
  return out;
}

Json edge_counts(const InteractionGraph& g) {
  Json j = Json::object();
  for (auto t : kAllEdgeTypes) j[edge_type_name(t)] = g.edge_count(t);
  return j;
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// Combined file when the text is one JSON object carrying "sessions";
// otherwise a session log.
std::vector<ToolUseEvent> read_events(const std::string& path) {
  const std::string text = read_text_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    Json probe = Json::parse(text, nullptr, false);
    if (!probe.is_discarded() && probe.is_object() && probe.contains("sessions")) {
      return flatten(parse_combined(text)).events;
    }
  }
  return parse_session_log(std::string_view(text)).events;
}

}  // namespace

std::string corpus_hash(const RunConfig& config) {
  const std::string mal = read_text_file(config.paths.malicious);
  const std::string ben = read_text_file(config.paths.benign);
  return hex64(fnv1a64(ben, fnv1a64(mal)));
}

Json provenance(const RunConfig& config, const std::string& corpus_hash) {
  Json j = Json::object();
  j["config_hash"] = hex64(config.hash());
  j["corpus_hash"] = corpus_hash.empty() ? Json(nullptr) : Json(corpus_hash);
  j["seed"] = config.eval.seed;
  return j;
}

void cmd_gen(const RunConfig& config, std::ostream& out,
             const std::string& session_log_dir) {
  const Corpus corpus = generate(config.generator);
  Json prov = provenance(config, "");
  prov["generator_seed"] = config.generator.seed;
  const CombinedFiles files = emit_corpus(corpus, prov);
  write_artifact(config.paths.malicious, files.malicious);
  write_artifact(config.paths.benign, files.benign);
  std::size_t sessions = 0;
  if (!session_log_dir.empty()) {
    ensure_dir(session_log_dir);
    for (const auto& chain : corpus.chains) {
      for (std::size_t k = 0; k < chain.fragments.size(); ++k) {
        const auto& fragment = chain.fragments[k];
        SessionMeta meta;
        meta.session_id = fragment.events.empty() ? chain.chain_id + "/s" + std::to_string(k)
                                                  : fragment.events.front().session_id;
        meta.run_id = chain.run_id;
        meta.campaign = chain.campaign;
        meta.style = chain.style;
        const std::string name = chain.chain_id + "_s" + std::to_string(k) + ".jsonl";
        write_text_file((fs::path(session_log_dir) / name).string(),
                        emit_session_log(fragment, meta));
        ++sessions;
      }
    }
  }
  const EventStream stream = flatten(corpus.chains);
  out << "generated " << corpus.chains.size() << " chains, " << stream.events.size()
      << " events -> " << config.paths.malicious << ", " << config.paths.benign << "\n";
  if (sessions) out << "wrote " << sessions << " session logs to " << session_log_dir << "\n";
}

void cmd_build(const RunConfig& config, std::ostream& out) {
  const LoadedCorpus lc = load_configured_corpus(config);
  const Json prov = provenance(config, lc.hash);
  const InteractionGraph graph = build_graph(lc.stream.events, config.robustness);
  const UnionFind uf = discover(graph, config.discovery);
  const auto chains = components(uf, &graph);
  write_artifact(out_path(config, "graph.snap"), write_snapshot(graph, prov));
  write_artifact(out_path(config, "chains.jsonl"),
                 dump_chains(chains, campaigns_of(lc.corpus)));
  Json stats = Json::object();
  stats["nodes"] = graph.node_count();
  stats["edges"] = edge_counts(graph);
  stats["chains"] = chains.size();
  stats["warnings"] = graph.warnings().size();
  stats["index_probes"] = graph.counters().index_probes();
  stats["provenance"] = prov;
  write_artifact(out_path(config, "build_stats.json"), stats.dump(2) + "\n");
  out << "nodes " << graph.node_count() << ", chains " << chains.size() << "\n";
  for (auto t : kAllEdgeTypes) {
    out << "  " << std::left << std::setw(20) << edge_type_name(t) << graph.edge_count(t)
        << "\n";
  }
}

void cmd_train_eval(const RunConfig& config, std::ostream& out) {
  const LoadedCorpus lc = load_configured_corpus(config);
  const Json prov = provenance(config, lc.hash);
  const std::string snap_path = out_path(config, "graph.snap");
  if (!fs::exists(snap_path)) {
    throw IoError("missing graph snapshot " + snap_path + " (run build first)");
  }
  const Snapshot snap = read_snapshot(read_text_file(snap_path));
  const InteractionGraph& graph = snap.graph;
  if (graph.node_count() != lc.stream.events.size()) {
    throw SchemaError("graph snapshot does not match the corpus (" +
                      std::to_string(graph.node_count()) + " nodes, " +
                      std::to_string(lc.stream.events.size()) + " events)");
  }

  const SplitAssignment split =
      stratified_split(lc.corpus.chains, config.eval.seed, config.eval.ratio);
  std::vector<ToolUseEvent> train_events;
  for (auto r : split.train_rows) train_events.push_back(lc.stream.events[r]);
  FeatureMatrix fm;
  fm.vocabulary = build_vocabulary(train_events);
  const Matrix raw = encode(graph, fm.vocabulary);
  fm.standardizer = Standardizer::fit(raw, split.train_rows);
  fm.rows = fm.standardizer.apply(raw);

  std::vector<int> y;
  for (const auto& l : lc.corpus.labels) y.push_back(l.y);
  const auto campaign_of = campaigns_of(lc.corpus);
  std::vector<std::string> campaigns;
  for (const auto& c : lc.corpus.chains) {
    if (c.campaign) campaigns.push_back(*c.campaign);
  }
  const auto chains = components(discover(graph, config.discovery), &graph);

  EvalReport report;
  report.threshold = config.eval.threshold;
  report.chain_threshold = config.eval.chain_threshold;
  report.sparse_below = config.eval.sparse_below;
  report.provenance = prov;
  report.provenance["config"] = config.to_json();
  report.provenance["config"].erase("paths");  // as in the hash
  report.provenance["split"] = {{"train_events", split.train_rows.size()},
                                {"test_events", split.test_rows.size()}};

  for (auto variant : config.detector.variants) {
    const DetectorConfig dc = config.detector.config_for(variant);
    DetectorModel model = variant == DetectorVariant::MLP
                              ? mlp_baseline_train(fm, y, split.train_rows, dc)
                              : train(dc, graph, fm, y, split.train_rows);
    model.provenance = prov;
    const std::string name = variant_name(variant);
    write_artifact(out_path(config, "models/" + name + ".json"), write_model(model));
    const auto preds = variant == DetectorVariant::MLP
                           ? mlp_baseline_predict(model, fm.rows)
                           : predict(model, graph, fm.rows);
    write_artifact(out_path(config, "predictions/" + name + ".csv"),
                   write_predictions(preds, prov));
    std::vector<double> p(preds.size());
    for (const auto& pr : preds) p[pr.event_id] = pr.p;

    ModelReport mr;
    mr.model = name;
    std::vector<double> tp;
    std::vector<int> ty;
    for (auto r : split.test_rows) {
      tp.push_back(p[r]);
      ty.push_back(y[r]);
    }
    mr.aggregate = event_metrics(tp, ty, config.eval.threshold);
    mr.campaigns = per_campaign_metrics(p, y, campaign_of, split.test_rows, campaigns,
                                        config.eval.threshold, config.eval.sparse_below);
    mr.chains = chain_level(chains, p, y, split.test_rows, config.eval.chain_threshold);
    out << name << ": F1 " << fmt(mr.aggregate.f1) << "  Acc " << fmt(mr.aggregate.accuracy)
        << "  (final loss " << fmt(model.loss_trace.back(), 4) << ")\n";
    report.models.push_back(std::move(mr));
  }
  write_artifact(out_path(config, "report.json"), report.to_json().dump(2) + "\n");
  const std::string table = report.to_text();
  write_artifact(out_path(config, "report.txt"), table);
  out << table;
}

std::size_t cmd_score(const RunConfig& config, const std::string& model_path,
                      const std::vector<std::string>& inputs, std::ostream& out) {
  const DetectorModel model = read_model(read_text_file(model_path));
  std::vector<ToolUseEvent> events;
  std::string hash;
  if (inputs.empty()) {
    const LoadedCorpus lc = load_configured_corpus(config);
    events = lc.stream.events;
    hash = lc.hash;
  } else {
    std::uint64_t h = fnv1a64("");
    for (const auto& path : inputs) {
      for (auto& e : read_events(path)) {
        e.event_id = static_cast<std::int64_t>(events.size());
        events.push_back(std::move(e));
      }
      h = fnv1a64(read_text_file(path), h);
    }
    hash = hex64(h);
  }
  const Json prov = provenance(config, hash);
  const InteractionGraph graph = build_graph(events, config.robustness);
  const auto chains = components(discover(graph, config.discovery), &graph);
  std::vector<Prediction> preds;
  if (!events.empty()) {
    const Matrix x = model.standardizer.apply(encode(graph, model.vocabulary));
    preds = model.config.variant == DetectorVariant::MLP ? mlp_baseline_predict(model, x)
                                                         : predict(model, graph, x);
  }
  std::vector<double> p(preds.size());
  for (const auto& pr : preds) p[pr.event_id] = pr.p;
  std::string verdicts;
  for (const auto& chain : chains) {
    const double score = score_chain(chain.members, p);
    const bool flagged = score >= config.eval.chain_threshold;
    Json v = Json::object();
    v["chain_id"] = chain.chain_id;
    v["events"] = chain.members.size();
    v["sessions"] = chain.sessions;
    v["score"] = score;
    v["verdict"] = flagged ? "malicious" : "benign";
    verdicts += v.dump() + "\n";
    out << "chain " << chain.chain_id << " events=" << chain.members.size()
        << " sessions=" << chain.sessions.size() << " score=" << fmt(score)
        << " verdict=" << (flagged ? "malicious" : "benign") << "\n";
  }
  write_artifact(out_path(config, "score/predictions.csv"), write_predictions(preds, prov));
  write_artifact(out_path(config, "score/verdicts.jsonl"), verdicts);
  out << chains.size() << " chains scored\n";
  return chains.size();
}

bool cmd_gradcheck(const RunConfig& config, double tolerance, std::ostream& out) {
  bool ok = true;
  const GradcheckFixture fixture = make_gradcheck_fixture(config.eval.seed);
  for (auto variant : config.detector.variants) {
    const DetectorModel model = init_model(config.detector.config_for(variant));
    const GradcheckReport r =
        gradcheck(model, fixture.graph, fixture.features, fixture.labels);
    const bool pass = r.max_relative_error < tolerance;
    ok = ok && pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-5s max_rel_err=%.3e (%s, %zu entries) %s\n",
                  variant_name(variant), r.max_relative_error, r.worst_tensor.c_str(),
                  r.entries_checked, pass ? "ok" : "FAIL");
    out << buf;
  }
  return ok;
}

void cmd_audit(const RunConfig& config, std::ostream& out) {
  const LoadedCorpus lc = load_configured_corpus(config);
  const AuditReport report = separability_audit(lc.corpus);
  Json j = report.to_json();
  j["provenance"] = provenance(config, lc.hash);
  write_artifact(out_path(config, "audit.json"), j.dump(2) + "\n");
  for (const auto& d : report.dims) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%3d %-28s ks=%.3f acc=%.3f\n", d.dim, d.name.c_str(),
                  d.ks, d.accuracy);
    out << buf;
  }
  out << "max single-feature balanced accuracy " << fmt(report.max_accuracy) << " ("
      << (report.worst_dim >= 0 ? report.dims[report.worst_dim].name : "-") << ")\n";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"fraggraph: cross-session fragmented-attack detection"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::string> output_dir, malicious, benign;
  std::optional<std::uint64_t> seed;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run configuration");
    sub->add_option("-o,--output-dir", output_dir, "Artifact directory");
    sub->add_option("--malicious", malicious, "Malicious combined file");
    sub->add_option("--benign", benign, "Benign combined file");
    sub->add_option("--seed", seed, "Seed for generation, split and training");
  };
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  auto* build = app.add_subcommand("build", "Build the interaction graph and chains");
  auto* train_eval = app.add_subcommand("train-eval", "Train detectors and write the report");
  auto* score = app.add_subcommand("score", "Score an event stream with a trained model");
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  auto* audit = app.add_subcommand("audit", "Single-feature separability audit");
  for (auto* s : {gen, build, train_eval, score, grad, audit}) common(s);

  std::optional<int> n_malicious, n_benign;
  std::string session_logs;
  bool rotate = false;
  gen->add_option("--n-malicious", n_malicious);
  gen->add_option("--n-benign", n_benign);
  gen->add_option("--session-logs", session_logs, "Also write one JSONL log per session");
  gen->add_flag("--rotate-identities", rotate);

  std::optional<std::int64_t> window;
  std::optional<int> kappa;
  for (auto* s : {build, score}) {
    s->add_option("--window", window, "Maximum event-id span of an edge");
    s->add_option("--kappa", kappa, "Hamming radius for argument similarity");
  }

  std::vector<std::string> variants;
  std::optional<int> epochs;
  for (auto* s : {train_eval, grad}) {
    s->add_option("--variants", variants, "Detector variants")->delimiter(',');
  }
  train_eval->add_option("--epochs", epochs, "Epochs for every variant");

  std::string model_path;
  std::vector<std::string> inputs;
  score->add_option("-m,--model", model_path, "Model file")->required();
  score->add_option("-i,--input", inputs, "Combined file or session log (repeatable)");

  double tolerance = 1e-4;
  grad->add_option("--tolerance", tolerance);

  std::vector<std::string> argv_store = {"fraggraph"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (output_dir) config.paths.output_dir = *output_dir;
    if (malicious) config.paths.malicious = *malicious;
    if (benign) config.paths.benign = *benign;
    if (seed) {
      config.generator.seed = *seed;
      config.eval.seed = *seed;
      config.detector.common["seed"] = *seed;
    }
    if (n_malicious) config.generator.n_malicious = *n_malicious;
    if (n_benign) config.generator.n_benign = *n_benign;
    if (rotate) config.generator.rotate_identities = true;
    if (window) config.robustness.window = *window;
    if (kappa) config.robustness.kappa = *kappa;
    if (!variants.empty()) {
      config.detector.variants.clear();
      for (const auto& v : variants) config.detector.variants.push_back(variant_from_name(v));
    }
    if (epochs) config.detector.common["epochs"] = *epochs;
    config.generator.validate();
    config.robustness.validate();
    config.discovery.validate();
    for (auto v : config.detector.variants) config.detector.config_for(v);

    if (*gen) cmd_gen(config, out, session_logs);
    else if (*build) cmd_build(config, out);
    else if (*train_eval) cmd_train_eval(config, out);
    else if (*score) cmd_score(config, model_path, inputs, out);
    else if (*grad) return cmd_gradcheck(config, tolerance, out) ? kExitOk : kExitNumeric;
    else if (*audit) cmd_audit(config, out);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericFault& e) {
    err << "numeric fault: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitData;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace fraggraph
