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

#include "fraggraph/features.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "fraggraph/errors.h"
#include "fraggraph/hashing.h"

namespace fraggraph {

namespace fl = feature_layout;

namespace {
// Reserved: tools with this prefix never occupy a vocabulary slot.
constexpr std::string_view kPadPrefix = "__pad_";
}  // namespace

ToolVocabulary::ToolVocabulary(std::vector<std::string> tools)
    : tools_(std::move(tools)) {
  if (tools_.size() != kVocabularySize) {
    throw UsageError("tool vocabulary must hold exactly 20 names");
  }
}

int ToolVocabulary::index_of(std::string_view tool) const {
  if (tool.starts_with(kPadPrefix)) return -1;
  for (std::size_t i = 0; i < tools_.size(); ++i) {
    if (tools_[i] == tool) return static_cast<int>(i);
  }
  return -1;
}

std::uint64_t ToolVocabulary::hash() const {
  std::uint64_t h = kFnvOffsetBasis;
  for (const auto& t : tools_) {
    h = fnv1a64(t, h);
    h = fnv1a64(std::string_view("\n", 1), h);
  }
  return h;
}

ToolVocabulary build_vocabulary(std::span<const ToolUseEvent> training_events) {
  if (training_events.empty()) {
    throw UsageError("build_vocabulary: empty training split");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& e : training_events) ++counts[e.tool];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  std::vector<std::string> tools;
  for (std::size_t i = 0; i < ranked.size() && i < kVocabularySize; ++i) {
    tools.push_back(ranked[i].first);
  }
  for (std::size_t k = 0; tools.size() < kVocabularySize; ++k) {
    tools.push_back(std::string(kPadPrefix) + std::to_string(k));
  }
  return ToolVocabulary(std::move(tools));
}

Matrix encode(const InteractionGraph& graph, const ToolVocabulary& vocabulary) {
  const auto n = static_cast<std::int64_t>(graph.node_count());
  Matrix x = Matrix::Zero(n, kFeatureDims);
  std::vector<int> tool_slot(n);
  for (std::int64_t v = 0; v < n; ++v) {
    tool_slot[v] = vocabulary.index_of(graph.node(v).tool);
  }
  for (std::int64_t v = 0; v < n; ++v) {
    const ToolUseEvent& e = graph.node(v);
    auto row = x.row(v);
    row[fl::kIsToolCall] = e.is_call() ? 1.0 : 0.0;
    row[fl::kIsToolResult] = e.is_call() ? 0.0 : 1.0;
    row[fl::kSuccess] = e.success ? 1.0 : 0.0;
    row[fl::kSeq] = static_cast<double>(e.seq);
    row[fl::kIteration] = static_cast<double>(e.iteration);
    row[fl::kRequestBytes] = static_cast<double>(e.request_bytes);
    row[fl::kResponseBytes] = static_cast<double>(e.response_bytes);
    row[fl::kCallIndex] = e.call_index ? static_cast<double>(*e.call_index) : -1.0;
    row[fl::kResultIndex] =
        e.result_index ? static_cast<double>(*e.result_index) : -1.0;
    if (tool_slot[v] >= 0) row[fl::kToolOneHot + tool_slot[v]] = 1.0;

    for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
      const auto type = static_cast<EdgeType>(t);
      const std::size_t base = fl::panel_offset(type);
      const auto& incoming = graph.in_edges(type, v);
      std::set<std::string_view> distinct;
      double failed = 0;
      for (std::size_t idx : incoming) {
        const std::int64_t u = graph.edges()[idx].src;
        const ToolUseEvent& nb = graph.node(u);
        if (tool_slot[u] >= 0) row[base + fl::kToolHistogram + tool_slot[u]] += 1.0;
        distinct.insert(nb.tool);
        if (!nb.success) failed += 1.0;
      }
      row[base + fl::kInDegree] = static_cast<double>(incoming.size());
      row[base + fl::kDistinctTools] = static_cast<double>(distinct.size());
      row[base + fl::kFailedNeighbours] = failed;
    }
  }
  return x;
}

Standardizer Standardizer::fit(const Matrix& raw,
                               std::span<const std::int64_t> training_rows) {
  if (training_rows.empty()) {
    throw UsageError("fit_standardizer: no training rows");
  }
  const auto d = raw.cols();
  Standardizer s;
  s.mean = Vector::Zero(d);
  s.std = Vector::Zero(d);
  for (auto r : training_rows) s.mean += raw.row(r).transpose();
  s.mean /= static_cast<double>(training_rows.size());
  for (auto r : training_rows) {
    s.std += (raw.row(r).transpose() - s.mean).array().square().matrix();
  }
  s.std /= static_cast<double>(training_rows.size());
  for (Eigen::Index j = 0; j < d; ++j) {
    s.std[j] = std::sqrt(s.std[j]);
    if (s.std[j] < 1e-12) s.std[j] = 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& raw) const {
  if (raw.cols() != mean.size()) {
    throw UsageError("standardizer width does not match feature matrix");
  }
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      out(i, j) = (raw(i, j) - mean[j]) / std[j];
    }
  }
  return out;
}

Json Standardizer::to_json() const {
  Json j = Json::object();
  j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
  j["std"] = std::vector<double>(std.data(), std.data() + std.size());
  return j;
}

Standardizer Standardizer::from_json(const Json& j) {
  const auto m = j.at("mean").get<std::vector<double>>();
  const auto s = j.at("std").get<std::vector<double>>();
  if (m.size() != s.size()) throw SchemaError("standardizer: mean/std length mismatch");
  Standardizer out;
  out.mean = Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size()));
  out.std = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
  return out;
}

std::string write_feature_dump(const FeatureMatrix& features) {
  Json header = Json::object();
  header["layout_version"] = 1;
  header["rows"] = features.rows.rows();
  header["cols"] = features.rows.cols();
  header["vocabulary"] = features.vocabulary.tools();
  header["standardizer"] = features.standardizer.to_json();
  std::string out = header.dump() + '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < features.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.rows.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), j == 0 ? "%.17g" : ",%.17g",
                    features.rows(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix read_feature_dump(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty feature dump", 1);
  Json header = Json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("layout_version", 0) != 1) {
    throw ParseError("unsupported feature dump header", 1);
  }
  FeatureMatrix f;
  f.vocabulary = ToolVocabulary(header.at("vocabulary").get<std::vector<std::string>>());
  f.standardizer = Standardizer::from_json(header.at("standardizer"));
  const auto rows = header.at("rows").get<Eigen::Index>();
  const auto cols = header.at("cols").get<Eigen::Index>();
  f.rows.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError("feature dump truncated", static_cast<std::size_t>(i) + 2);
    }
    const char* p = line.c_str();
    for (Eigen::Index j = 0; j < cols; ++j) {
      char* end = nullptr;
      f.rows(i, j) = std::strtod(p, &end);
      if (end == p) {
        throw ParseError("bad feature value", static_cast<std::size_t>(i) + 2);
      }
      p = (*end == ',') ? end + 1 : end;
    }
  }
  return f;
}

}  // namespace fraggraph
