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

#ifndef FRAGGRAPH_RUN_CONFIG_H_
#define FRAGGRAPH_RUN_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fraggraph/chain_discovery.h"
#include "fraggraph/detectors.h"
#include "fraggraph/graph.h"
#include "fraggraph/synth_corpus.h"

namespace fraggraph {

struct PathsConfig {
  std::string malicious = "corpus/malicious.json";
  std::string benign = "corpus/benign.json";
  std::string output_dir = "out";
};

struct DetectorSection {
  std::vector<DetectorVariant> variants = {DetectorVariant::GCN, DetectorVariant::SAGE,
                                           DetectorVariant::GAT, DetectorVariant::GIN,
                                           DetectorVariant::MLP};
  // Raw per-variant overrides, applied over DetectorConfig::defaults.
  std::map<std::string, Json> overrides;
  // Applied to every variant before its own overrides.
  Json common = Json::object();

  DetectorConfig config_for(DetectorVariant variant) const;
};

struct EvalSection {
  double ratio = 0.7;
  std::uint64_t seed = 42;
  double threshold = 0.5;
  double chain_threshold = 0.5;
  std::int64_t sparse_below = 20;
  bool cover_as_malicious = true;
};

struct RunConfig {
  PathsConfig paths;
  GeneratorConfig generator = GeneratorConfig::defaults();
  DiscoveryConfig discovery;
  RobustnessConfig robustness;
  DetectorSection detector;
  EvalSection eval;

  Json to_json() const;
  // Missing sections and keys keep defaults; unknown keys are rejected.
  static RunConfig from_json(const Json& j);
  static RunConfig load(const std::string& path);
  // FNV-1a of the canonical serialization, paths excluded.
  std::uint64_t hash() const;
};

}  // namespace fraggraph

#endif  // FRAGGRAPH_RUN_CONFIG_H_
