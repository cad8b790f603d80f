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

#include "fraggraph/evaluator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "fraggraph/errors.h"
#include "fraggraph/rng.h"

namespace fraggraph {
namespace {

void finish(Metrics& m) {
  const auto pp = m.tp + m.fp;
  const auto ap = m.tp + m.fn;
  m.precision = pp ? static_cast<double>(m.tp) / pp : 0.0;
  m.recall = ap ? static_cast<double>(m.tp) / ap : 0.0;
  m.f1 = (m.precision + m.recall) > 0
             ? 2 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.accuracy = m.total() ? static_cast<double>(m.tp + m.tn) / m.total() : 0.0;
}

void tally(Metrics& m, double p, int y, double threshold) {
  const bool hit = p >= threshold;
  if (y) {
    (hit ? m.tp : m.fn)++;
  } else {
    (hit ? m.fp : m.tn)++;
  }
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

Json Metrics::to_json() const {
  Json j = Json::object();
  j["precision"] = round3(precision);
  j["recall"] = round3(recall);
  j["f1"] = round3(f1);
  j["accuracy"] = round3(accuracy);
  j["tp"] = tp;
  j["fp"] = fp;
  j["tn"] = tn;
  j["fn"] = fn;
  return j;
}

SplitAssignment stratified_split(const std::vector<ChainRecord>& chains,
                                 std::uint64_t seed, double ratio) {
  if (!(ratio > 0 && ratio < 1)) throw UsageError("split ratio must be in (0, 1)");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < chains.size(); ++i) {
    by_class[chains[i].is_malicious ? 1 : 0].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < 2) {
      throw UsageError(std::string("stratified split needs at least 2 ") +
                       (c ? "malicious" : "benign") + " chains");
    }
  }
  SplitAssignment split;
  split.seed = seed;
  split.ratio = ratio;
  Rng rng(seed);
  std::vector<Partition> part(chains.size(), Partition::Test);
  for (auto& members : by_class) {
    rng.shuffle(members);
    const auto n = members.size();
    const auto n_train = std::min<std::size_t>(
        static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9)), n - 1);
    for (std::size_t k = 0; k < n_train; ++k) part[members[k]] = Partition::Train;
  }
  std::int64_t next = 0;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    if (!split.chains.emplace(chains[i].chain_id, part[i]).second) {
      throw SchemaError("duplicate chain id '" + chains[i].chain_id + "'");
    }
    auto& rows = part[i] == Partition::Train ? split.train_rows : split.test_rows;
    for (std::size_t e = 0; e < chains[i].event_count(); ++e) rows.push_back(next++);
  }
  return split;
}

Metrics event_metrics(std::span<const double> p, std::span<const int> y,
                      double threshold) {
  if (p.empty()) throw UsageError("event_metrics on an empty set");
  if (p.size() != y.size()) throw UsageError("predictions and labels differ in size");
  Metrics m;
  for (std::size_t i = 0; i < p.size(); ++i) tally(m, p[i], y[i], threshold);
  finish(m);
  return m;
}

std::vector<CampaignRow> per_campaign_metrics(
    std::span<const double> p, std::span<const int> y,
    const std::vector<std::optional<std::string>>& campaign_of_event,
    std::span<const std::int64_t> test_rows,
    const std::vector<std::string>& campaigns, double threshold,
    std::int64_t sparse_below) {
  std::set<std::string> names(campaigns.begin(), campaigns.end());
  std::vector<CampaignRow> rows;
  for (const auto& name : names) {
    CampaignRow row;
    row.campaign = name;
    for (auto r : test_rows) {
      if (y[r]) {
        if (campaign_of_event[r] != name) continue;
        ++row.positives;
      }
      tally(row.metrics, p[r], y[r], threshold);
    }
    finish(row.metrics);
    row.sparse = row.positives < sparse_below;
    rows.push_back(std::move(row));
  }
  return rows;
}

double score_chain(std::span<const std::int64_t> members,
                   std::span<const double> p) {
  if (members.empty()) throw UsageError("cannot score an empty chain");
  double best = -1;
  for (auto m : members) best = std::max(best, p[m]);
  return best;
}

ChainLevel chain_level(const std::vector<Chain>& chains,
                       std::span<const double> p, std::span<const int> y,
                       std::span<const std::int64_t> test_rows,
                       double threshold) {
  std::vector<bool> in_test(p.size(), false);
  for (auto r : test_rows) in_test[r] = true;
  ChainLevel out;
  for (const auto& chain : chains) {
    std::vector<std::int64_t> members;
    int positives = 0;
    for (auto m : chain.members) {
      if (!in_test[m]) continue;
      members.push_back(m);
      positives += y[m];
    }
    if (members.empty()) continue;
    ChainVerdict v;
    v.chain_id = chain.chain_id;
    v.test_members = members.size();
    v.score = score_chain(members, p);
    v.verdict = v.score >= threshold;
    v.y = 2 * positives > static_cast<int>(members.size()) ? 1 : 0;
    tally(out.metrics, v.score, v.y, threshold);
    out.verdicts.push_back(v);
  }
  finish(out.metrics);
  return out;
}

Json EvalReport::to_json() const {
  Json j = Json::object();
  j["threshold"] = threshold;
  j["chain_threshold"] = chain_threshold;
  j["sparse_below"] = sparse_below;
  Json models_j = Json::array();
  for (const auto& m : models) {
    Json mj = Json::object();
    mj["model"] = m.model;
    mj["aggregate"] = m.aggregate.to_json();
    Json rows = Json::array();
    for (const auto& r : m.campaigns) {
      Json rj = Json::object();
      rj["campaign"] = r.campaign;
      rj["f1"] = round3(r.metrics.f1);
      rj["accuracy"] = round3(r.metrics.accuracy);
      rj["positives"] = r.positives;
      rj["sparse"] = r.sparse;
      rows.push_back(std::move(rj));
    }
    mj["campaigns"] = std::move(rows);
    Json cj = Json::object();
    cj["extension"] = true;
    cj["metrics"] = m.chains.metrics.to_json();
    Json verdicts = Json::array();
    for (const auto& v : m.chains.verdicts) {
      Json vj = Json::object();
      vj["chain_id"] = v.chain_id;
      vj["test_members"] = v.test_members;
      vj["score"] = round3(v.score);
      vj["verdict"] = v.verdict;
      vj["y"] = v.y;
      verdicts.push_back(std::move(vj));
    }
    cj["verdicts"] = std::move(verdicts);
    mj["chain_level"] = std::move(cj);
    models_j.push_back(std::move(mj));
  }
  j["models"] = std::move(models_j);
  j["provenance"] = provenance;
  return j;
}

std::string EvalReport::to_text() const {
  std::vector<std::string> names;
  if (!models.empty()) {
    for (const auto& r : models.front().campaigns) names.push_back(r.campaign);
  }
  std::size_t width = 9;  // "Aggregate"
  for (const auto& n : names) width = std::max(width, n.size() + 2);
  char buf[512];
  std::string out;
  auto cell = [&](const std::string& s, std::size_t w) {
    std::string c = s;
    if (c.size() < w) c.insert(0, w - c.size(), ' ');
    return c;
  };
  std::string header = "Campaign";
  header.resize(width, ' ');
  std::string sub(width, ' ');
  for (const auto& m : models) {
    header += " | " + cell(m.model, 13);
    sub += " | " + cell("F1", 6) + " " + cell("Acc", 6);
  }
  out += header + "\n" + sub + "\n";
  out += std::string(sub.size(), '-') + "\n";
  auto row = [&](const std::string& label, auto&& pick) {
    std::string line = label;
    line.resize(width, ' ');
    for (const auto& m : models) {
      const auto [f1, acc] = pick(m);
      line += " | " + cell(fmt3(f1), 6) + " " + cell(fmt3(acc), 6);
    }
    out += line + "\n";
  };
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bool sparse = models.front().campaigns[i].sparse;
    row(names[i] + (sparse ? "*" : ""), [&](const ModelReport& m) {
      return std::pair{m.campaigns[i].metrics.f1, m.campaigns[i].metrics.accuracy};
    });
  }
  out += std::string(sub.size(), '-') + "\n";
  row("Aggregate", [](const ModelReport& m) {
    return std::pair{m.aggregate.f1, m.aggregate.accuracy};
  });
  std::snprintf(buf, sizeof(buf),
                "* fewer than %lld positive test events; treat as indicative.\n",
                static_cast<long long>(sparse_below));
  out += buf;
  out += "Chain level (extension, max-pooled score, threshold " + fmt3(chain_threshold) + "):";
  for (const auto& m : models) {
    out += " " + m.model + " F1=" + fmt3(m.chains.metrics.f1) +
           " Acc=" + fmt3(m.chains.metrics.accuracy);
  }
  out += "\n";
  if (!provenance.is_null()) {
    Json short_prov = Json::object();
    for (const char* k : {"config_hash", "corpus_hash", "seed"}) {
      if (provenance.contains(k)) short_prov[k] = provenance[k];
    }
    out += "provenance: " + short_prov.dump() + "\n";
  }
  return out;
}

}  // namespace fraggraph
