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

#ifndef FRAGGRAPH_EVALUATOR_H_
#define FRAGGRAPH_EVALUATOR_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fraggraph/chain_discovery.h"
#include "fraggraph/event_model.h"

namespace fraggraph {

enum class Partition { Train, Test };

// Chains ("outer samples") split per class; event rows follow their chain.
struct SplitAssignment {
  std::map<std::string, Partition> chains;
  std::uint64_t seed = 0;
  double ratio = 0.7;
  std::vector<std::int64_t> train_rows;  // ascending event ids
  std::vector<std::int64_t> test_rows;
};

// Within each class the chains are shuffled with `seed` and the first
// ceil(ratio * n) go to Train, capped at n - 1 so both partitions keep both
// classes. Event ids follow flatten(chains).
SplitAssignment stratified_split(const std::vector<ChainRecord>& chains,
                                 std::uint64_t seed, double ratio = 0.7);

struct Metrics {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  Json to_json() const;
};

Metrics event_metrics(std::span<const double> p, std::span<const int> y,
                      double threshold = 0.5);

struct CampaignRow {
  std::string campaign;
  Metrics metrics;
  std::int64_t positives = 0;  // positive test events of the campaign
  bool sparse = false;
};

// One row per campaign in `campaigns`, over the test rows that are either
// positives of that campaign or benign. Rows sorted by campaign name.
std::vector<CampaignRow> per_campaign_metrics(
    std::span<const double> p, std::span<const int> y,
    const std::vector<std::optional<std::string>>& campaign_of_event,
    std::span<const std::int64_t> test_rows,
    const std::vector<std::string>& campaigns, double threshold = 0.5,
    std::int64_t sparse_below = 20);

// max over members of p.
double score_chain(std::span<const std::int64_t> members,
                   std::span<const double> p);

struct ChainVerdict {
  std::int64_t chain_id = 0;
  std::size_t test_members = 0;
  double score = 0;
  bool verdict = false;
  int y = 0;  // majority label of the test members
};

struct ChainLevel {
  std::vector<ChainVerdict> verdicts;
  Metrics metrics;
};

// Discovered chains restricted to their test members; chains without test
// members are skipped.
ChainLevel chain_level(const std::vector<Chain>& chains,
                       std::span<const double> p, std::span<const int> y,
                       std::span<const std::int64_t> test_rows,
                       double threshold = 0.5);

struct ModelReport {
  std::string model;
  Metrics aggregate;
  std::vector<CampaignRow> campaigns;
  ChainLevel chains;
};

struct EvalReport {
  std::vector<ModelReport> models;
  double threshold = 0.5;
  double chain_threshold = 0.5;
  std::int64_t sparse_below = 20;
  Json provenance;

  Json to_json() const;
  // Table layout: one row per campaign plus an aggregate row, one
  // (F1, Acc) column pair per model, three decimals.
  std::string to_text() const;
};

// Rounds to three decimals for presentation.
double round3(double v);

}  // namespace fraggraph

#endif  // FRAGGRAPH_EVALUATOR_H_
