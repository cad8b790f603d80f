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

#ifndef FRAGGRAPH_FEATURES_H_
#define FRAGGRAPH_FEATURES_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fraggraph/event_model.h"
#include "fraggraph/graph.h"

namespace fraggraph {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kVocabularySize = 20;
inline constexpr std::size_t kOwnBlockDims = 9 + kVocabularySize;    // 29
inline constexpr std::size_t kPanelDims = 1 + kVocabularySize + 2;   // 23
inline constexpr std::size_t kFeatureDims =
    kOwnBlockDims + kStructuralEdgeTypes * kPanelDims;               // 121

// Column offsets inside the encoded vector.
namespace feature_layout {
inline constexpr std::size_t kIsToolCall = 0;
inline constexpr std::size_t kIsToolResult = 1;
inline constexpr std::size_t kSuccess = 2;
inline constexpr std::size_t kSeq = 3;
inline constexpr std::size_t kIteration = 4;
inline constexpr std::size_t kRequestBytes = 5;
inline constexpr std::size_t kResponseBytes = 6;
inline constexpr std::size_t kCallIndex = 7;
inline constexpr std::size_t kResultIndex = 8;
inline constexpr std::size_t kToolOneHot = 9;

// First column of the panel summarising incoming edges of `type`.
constexpr std::size_t panel_offset(EdgeType type) {
  return kOwnBlockDims + static_cast<std::size_t>(type) * kPanelDims;
}
// Within a panel.
inline constexpr std::size_t kInDegree = 0;
inline constexpr std::size_t kToolHistogram = 1;
inline constexpr std::size_t kDistinctTools = 1 + kVocabularySize;
inline constexpr std::size_t kFailedNeighbours = 2 + kVocabularySize;
}  // namespace feature_layout

// The 20 most frequent tools of the training split, ties broken by name.
// Short vocabularies are padded with names that never match a real tool.
class ToolVocabulary {
 public:
  ToolVocabulary() = default;
  explicit ToolVocabulary(std::vector<std::string> tools);

  const std::vector<std::string>& tools() const { return tools_; }
  // Position in the vocabulary, or -1 when out of vocabulary.
  int index_of(std::string_view tool) const;
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tools_;
};

ToolVocabulary build_vocabulary(std::span<const ToolUseEvent> training_events);

// Raw, unstandardized encoding; one row per node.
Matrix encode(const InteractionGraph& graph, const ToolVocabulary& vocabulary);

struct Standardizer {
  Vector mean;
  Vector std;

  // Population statistics; components below 1e-12 are replaced by 1.
  static Standardizer fit(const Matrix& raw,
                          std::span<const std::int64_t> training_rows);
  Matrix apply(const Matrix& raw) const;
  Json to_json() const;
  static Standardizer from_json(const Json& j);
};

struct FeatureMatrix {
  Matrix rows;  // standardized
  Standardizer standardizer;
  ToolVocabulary vocabulary;
};

// Text dump: one JSON header line (layout version, vocabulary, mean, std)
// followed by one comma-separated row per event.
std::string write_feature_dump(const FeatureMatrix& features);
FeatureMatrix read_feature_dump(std::string_view text);

}  // namespace fraggraph

#endif  // FRAGGRAPH_FEATURES_H_
