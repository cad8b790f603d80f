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

#ifndef FRAGGRAPH_SYNTH_CORPUS_H_
#define FRAGGRAPH_SYNTH_CORPUS_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fraggraph/event_model.h"
#include "fraggraph/features.h"

namespace fraggraph {

struct CampaignWeight {
  std::string name;
  double weight = 1.0;
};

// Inclusive byte range.
struct ByteRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

struct ByteProfile {
  ByteRange read_result{200, 1500};
  ByteRange oversized_read{5000, 15000};
  ByteRange write_arguments{300, 2000};
  ByteRange large_write{3000, 10000};
  ByteRange call_arguments{40, 400};
  ByteRange result{100, 1500};
  ByteRange failure_result{60, 240};
  // Per chain.
  std::pair<int, int> oversized_reads{1, 4};
  std::pair<int, int> large_writes{1, 3};
};

struct GeneratorConfig {
  std::uint64_t seed = 42;
  int n_malicious = 100;
  int n_benign = 200;
  std::vector<CampaignWeight> campaigns;
  std::vector<std::string> tool_catalogue;
  std::vector<std::string> styles;
  double noise_rate = 0.30;
  // Probability tables over fragment counts 4..16 and 7..14.
  std::vector<double> malicious_length;
  std::vector<double> benign_length;
  ByteProfile bytes;
  // Tool calls per fragment, inclusive: an opening read, the templated call,
  // generic calls, a closing write.
  std::pair<int, int> calls_per_fragment{3, 5};
  // Chance that an event mentions a resource from its pool: chain-wide for
  // malicious chains, per session for benign ones. Mentions only change
  // argument text, never sizes or tools, so own-event features stay matched.
  double reference_rate = 0.6;
  double benign_reuse_rate = 0.3;
  // Each malicious fragment runs under its own user id with fresh resource
  // names and no artifact handoff; only the argument template carries over.
  bool rotate_identities = false;
  // Longest result preview stored; result_bytes keeps the full size.
  std::int64_t preview_limit = 480;

  static GeneratorConfig defaults();
  void validate() const;
  Json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static GeneratorConfig from_json(const Json& j);
};

inline constexpr int kMaliciousLengthMin = 4;
inline constexpr int kMaliciousLengthMax = 16;
inline constexpr int kBenignLengthMin = 7;
inline constexpr int kBenignLengthMax = 14;

// Malicious chains first, then benign; labels follow flatten(chains).
struct Corpus {
  std::vector<ChainRecord> chains;
  std::vector<EventLabel> labels;

  std::vector<ChainRecord> malicious() const;
  std::vector<ChainRecord> benign() const;
};

Corpus generate(const GeneratorConfig& config);

struct CombinedFiles {
  std::string malicious;
  std::string benign;
};
CombinedFiles emit_corpus(const Corpus& corpus, const Json& provenance = nullptr);

// Concatenates parsed malicious and benign chains in that order.
Corpus load_corpus(std::string_view malicious_text, std::string_view benign_text,
                   const LabelPolicy& policy = {});

struct DimAudit {
  int dim = 0;
  std::string name;
  double ks = 0;        // two-sample Kolmogorov-Smirnov statistic
  double accuracy = 0;  // best one-threshold balanced accuracy
};

struct AuditReport {
  std::vector<DimAudit> dims;
  double max_accuracy = 0;
  int worst_dim = -1;

  Json to_json() const;
};

// Over the own-event block of the raw encoding. Accuracy is balanced
// (mean of per-class recall), so class imbalance alone scores 0.5.
AuditReport separability_audit(const Matrix& raw_features, std::span<const int> y);
AuditReport separability_audit(const Corpus& corpus);

// Names of the own-event block columns, vocabulary entries last.
std::vector<std::string> own_block_names(const ToolVocabulary& vocabulary);

}  // namespace fraggraph

#endif  // FRAGGRAPH_SYNTH_CORPUS_H_
