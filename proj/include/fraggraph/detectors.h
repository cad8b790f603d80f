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

#ifndef FRAGGRAPH_DETECTORS_H_
#define FRAGGRAPH_DETECTORS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SparseCore>

#include "fraggraph/features.h"
#include "fraggraph/graph.h"

namespace fraggraph {

enum class DetectorVariant { GCN, SAGE, GAT, GIN, MLP };

const char* variant_name(DetectorVariant variant);
DetectorVariant variant_from_name(std::string_view name);

struct DetectorConfig {
  DetectorVariant variant = DetectorVariant::GCN;
  int hidden = 128;
  int layers = 2;
  int epochs = 50;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  // Unset: N-/N+ over the training mask.
  std::optional<double> pos_weight;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Rows per Adam step, reshuffled every epoch; 0 = full batch. Only the
  // MLP supports mini-batches (default 200).
  int batch_size = 0;

  // GNN variants train 50 full-batch epochs, the MLP baseline 200 epochs of
  // 200-row mini-batches.
  static DetectorConfig defaults(DetectorVariant variant);
  void validate() const;
  Json to_json() const;
  static DetectorConfig from_json(const Json& j);
};

struct Tensor {
  std::string name;
  Matrix value;
};

// Sparse per-type propagation operators for one variant. Edges are treated
// as undirected: entry (v, u) counts the edges of that type between v and u.
// GCN uses D^-1/2 A D^-1/2 with D = degree + 1, SAGE and GAT the row mean,
// GIN the plain sum.
struct MessageOperators {
  using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  std::array<SparseMatrix, kStructuralEdgeTypes> op;
  std::array<SparseMatrix, kStructuralEdgeTypes> op_t;
  // N x 4, 1 where the node has at least one neighbour of that type.
  Matrix present;

  static MessageOperators build(const InteractionGraph& graph,
                                DetectorVariant variant);
};

struct DetectorModel {
  DetectorConfig config;
  std::vector<Tensor> params;
  Standardizer standardizer;
  ToolVocabulary vocabulary;
  std::vector<double> loss_trace;
  double pos_weight = 1.0;
  Json provenance;

  const Matrix& param(std::string_view name) const;
  Matrix& param(std::string_view name);
};

struct Prediction {
  std::int64_t event_id = 0;
  double p = 0.5;
};

// Fresh model with Glorot-uniform weights drawn from config.seed and zero
// biases, attention logits and GIN epsilons.
DetectorModel init_model(const DetectorConfig& config);

// Per-event logits; `features` must already be standardized.
Vector forward(const DetectorModel& model, const InteractionGraph& graph,
               const Matrix& features);

// Mean BCE-with-logits over `rows`, positive terms weighted by pos_weight,
// multiplied by `scale`.
struct LossAndGrad {
  double loss = 0;
  std::vector<Matrix> grads;  // aligned with model.params
};
LossAndGrad loss_and_grad(const DetectorModel& model,
                          const InteractionGraph& graph,
                          const Matrix& features, std::span<const int> labels,
                          std::span<const std::int64_t> rows,
                          double pos_weight, double scale = 1.0);

double compute_pos_weight(std::span<const int> labels,
                          std::span<const std::int64_t> rows);

// Full-batch Adam with decoupled weight decay. `features.rows` must be
// standardized; its standardizer and vocabulary are copied into the model.
DetectorModel train(const DetectorConfig& config, const InteractionGraph& graph,
                    const FeatureMatrix& features, std::span<const int> labels,
                    std::span<const std::int64_t> train_rows);

std::vector<Prediction> predict(const DetectorModel& model,
                                const InteractionGraph& graph,
                                const Matrix& features);

// MLP baseline: the graph is not consulted.
DetectorModel mlp_baseline_train(const FeatureMatrix& features,
                                 std::span<const int> labels,
                                 std::span<const std::int64_t> train_rows,
                                 DetectorConfig config = DetectorConfig::defaults(
                                     DetectorVariant::MLP));
std::vector<Prediction> mlp_baseline_predict(const DetectorModel& model,
                                             const Matrix& features);

double logistic(double logit);

struct GradcheckOptions {
  double step = 1e-4;
  // Entries probed per tensor; small tensors are probed exhaustively.
  std::size_t samples_per_tensor = 12;
  std::uint64_t seed = 7;
  double loss_scale = 1.0;
  // Times the step may shrink tenfold when it straddles a ReLU kink.
  int max_refinements = 3;
};

struct GradcheckReport {
  double max_relative_error = 0;
  std::string worst_tensor;
  std::size_t entries_checked = 0;
  // Step reductions made because an estimate was not stable.
  std::size_t refined_entries = 0;
  std::vector<std::pair<std::string, double>> per_tensor;
};

// Seeded graph of at most 12 events spread over three sessions so that every
// structural edge type occurs, with standardized, jittered features and both
// labels present.
struct GradcheckFixture {
  InteractionGraph graph;
  Matrix features;
  std::vector<int> labels;
};
GradcheckFixture make_gradcheck_fixture(std::uint64_t seed, int nodes = 12);

// Analytic gradients against central finite differences on a tiny graph
// (at most 12 nodes). Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradcheckReport gradcheck(const DetectorModel& model,
                          const InteractionGraph& graph, const Matrix& features,
                          std::span<const int> labels,
                          const GradcheckOptions& options = {});

std::string write_model(const DetectorModel& model);
DetectorModel read_model(std::string_view text);

std::string write_predictions(const std::vector<Prediction>& predictions,
                              const Json& provenance = nullptr);
std::vector<Prediction> read_predictions(std::string_view text);

}  // namespace fraggraph

#endif  // FRAGGRAPH_DETECTORS_H_
