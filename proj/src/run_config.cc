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

#include "fraggraph/run_config.h"

#include "fraggraph/errors.h"
#include "fraggraph/hashing.h"

namespace fraggraph {
namespace {

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known,
                    std::string_view section) {
  if (!j.is_object()) throw UsageError(std::string(section) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw UsageError("unknown key '" + it.key() + "' in " + std::string(section));
    }
  }
}

Json merged(Json base, const Json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) base[it.key()] = it.value();
  return base;
}

}  // namespace

DetectorConfig DetectorSection::config_for(DetectorVariant variant) const {
  Json j = DetectorConfig::defaults(variant).to_json();
  j = merged(j, common);
  if (auto it = overrides.find(variant_name(variant)); it != overrides.end()) {
    j = merged(j, it->second);
  }
  j["variant"] = variant_name(variant);
  return DetectorConfig::from_json(j);
}

Json RunConfig::to_json() const {
  Json j = Json::object();
  Json p = Json::object();
  p["malicious"] = paths.malicious;
  p["benign"] = paths.benign;
  p["output_dir"] = paths.output_dir;
  j["paths"] = std::move(p);
  j["generator"] = generator.to_json();
  j["discovery"] = discovery.to_json();
  j["robustness"] = robustness.to_json();
  Json d = Json::object();
  Json names = Json::array();
  for (auto v : detector.variants) names.push_back(variant_name(v));
  d["variants"] = std::move(names);
  d["common"] = detector.common;
  Json over = Json::object();
  for (const auto& [k, v] : detector.overrides) over[k] = v;
  d["overrides"] = std::move(over);
  j["detector"] = std::move(d);
  Json e = Json::object();
  e["ratio"] = eval.ratio;
  e["seed"] = eval.seed;
  e["threshold"] = eval.threshold;
  e["chain_threshold"] = eval.chain_threshold;
  e["sparse_below"] = eval.sparse_below;
  e["cover_as_malicious"] = eval.cover_as_malicious;
  j["eval"] = std::move(e);
  return j;
}

RunConfig RunConfig::from_json(const Json& j) {
  reject_unknown(j, {"paths", "generator", "discovery", "robustness", "detector", "eval"},
                 "config");
  RunConfig c;
  if (j.contains("paths")) {
    const Json& p = j["paths"];
    reject_unknown(p, {"malicious", "benign", "output_dir"}, "paths");
    c.paths.malicious = p.value("malicious", c.paths.malicious);
    c.paths.benign = p.value("benign", c.paths.benign);
    c.paths.output_dir = p.value("output_dir", c.paths.output_dir);
  }
  if (j.contains("generator")) c.generator = GeneratorConfig::from_json(j["generator"]);
  if (j.contains("discovery")) c.discovery = DiscoveryConfig::from_json(j["discovery"]);
  if (j.contains("robustness")) c.robustness = RobustnessConfig::from_json(j["robustness"]);
  if (j.contains("detector")) {
    const Json& d = j["detector"];
    reject_unknown(d, {"variants", "common", "overrides"}, "detector");
    if (d.contains("variants")) {
      c.detector.variants.clear();
      for (const auto& v : d["variants"]) {
        c.detector.variants.push_back(variant_from_name(v.get<std::string>()));
      }
    }
    if (d.contains("common")) c.detector.common = d["common"];
    if (d.contains("overrides")) {
      for (auto it = d["overrides"].begin(); it != d["overrides"].end(); ++it) {
        variant_from_name(it.key());
        c.detector.overrides[it.key()] = it.value();
      }
    }
    // Surface bad keys now rather than at training time.
    for (auto v : c.detector.variants) c.detector.config_for(v);
  }
  if (j.contains("eval")) {
    const Json& e = j["eval"];
    reject_unknown(e, {"ratio", "seed", "threshold", "chain_threshold", "sparse_below",
                       "cover_as_malicious"},
                   "eval");
    c.eval.ratio = e.value("ratio", c.eval.ratio);
    c.eval.seed = e.value("seed", c.eval.seed);
    c.eval.threshold = e.value("threshold", c.eval.threshold);
    c.eval.chain_threshold = e.value("chain_threshold", c.eval.chain_threshold);
    c.eval.sparse_below = e.value("sparse_below", c.eval.sparse_below);
    c.eval.cover_as_malicious = e.value("cover_as_malicious", c.eval.cover_as_malicious);
    if (!(c.eval.ratio > 0 && c.eval.ratio < 1)) throw UsageError("eval.ratio must be in (0, 1)");
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const std::string text = read_text_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw UsageError("config file " + path + " is not valid JSON");
  return from_json(j);
}

std::uint64_t RunConfig::hash() const {
  // Where files live does not change what is computed.
  Json j = to_json();
  j.erase("paths");
  return fnv1a64(j.dump());
}

}  // namespace fraggraph
