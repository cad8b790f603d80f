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


#include "fraggraph/detectors.h"

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fraggraph/errors.h"
#include "fraggraph/rng.h"
#include "fraggraph/synth_corpus.h"

namespace fraggraph {
namespace {

constexpr DetectorVariant kGraphVariants[] = {DetectorVariant::GCN, DetectorVariant::SAGE,
                                              DetectorVariant::GAT, DetectorVariant::GIN};

using Dense = Eigen::MatrixXd;

Dense relu(const Dense& m) { return m.cwiseMax(0.0); }

// Dense per-type operator built straight from the edge list.
Dense dense_operator(const InteractionGraph& g, std::size_t t, DetectorVariant v) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  Dense a = Dense::Zero(n, n);
  for (const auto& e : g.edges()) {
    if (static_cast<std::size_t>(e.etype) != t) continue;
    a(e.src, e.dst) += 1;
    a(e.dst, e.src) += 1;
  }
  const Eigen::VectorXd deg = a.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j) == 0) continue;
      if (v == DetectorVariant::GCN) a(i, j) /= std::sqrt((deg[i] + 1) * (deg[j] + 1));
      if (v == DetectorVariant::SAGE || v == DetectorVariant::GAT) a(i, j) /= deg[i];
    }
  }
  return a;
}

Dense bias_rows(const Matrix& b, Eigen::Index n) { return Dense::Ones(n, 1) * Dense(b); }

Dense oracle_layer(const DetectorModel& m, const InteractionGraph& g, int layer, const Dense& x) {
  const std::string l = "l" + std::to_string(layer) + ".";
  const char* types[] = {"w_data_flow", "w_temporal", "w_shared_session", "w_shared_resource"};
  const auto v = m.config.variant;
  const Eigen::Index n = x.rows();
  Dense typed[4];
  for (std::size_t t = 0; t < 4; ++t) typed[t] = dense_operator(g, t, v) * x * Dense(m.param(l + types[t]));
  const Dense self = x * Dense(m.param(l + "w_self"));
  switch (v) {
    case DetectorVariant::GCN:
      return self + typed[0] + typed[1] + typed[2] + typed[3] + bias_rows(m.param(l + "bias"), n);
    case DetectorVariant::SAGE: {
      Dense out(n, 2 * self.cols());
      out << self + bias_rows(m.param(l + "bias_self"), n),
          typed[0] + typed[1] + typed[2] + typed[3] + bias_rows(m.param(l + "bias_neigh"), n);
      return out;
    }
    case DetectorVariant::GAT: {
      Dense out = self + bias_rows(m.param(l + "bias"), n);
      const Matrix& att = m.param(l + "attention");
      for (Eigen::Index i = 0; i < n; ++i) {
        double total = 0;
        double w[4] = {0, 0, 0, 0};
        for (std::size_t t = 0; t < 4; ++t) {
          bool present = false;
          for (const auto& e : g.edges()) {
            present |= static_cast<std::size_t>(e.etype) == t && (e.src == i || e.dst == i);
          }
          if (present) total += w[t] = std::exp(att(0, t));
        }
        for (std::size_t t = 0; t < 4; ++t) {
          if (w[t] > 0) out.row(i) += (w[t] / total) * typed[t].row(i);
        }
      }
      return out;
    }
    case DetectorVariant::GIN: {
      const double eps = m.param(l + "epsilon")(0, 0);
      const Dense z = (1 + eps) * self + typed[0] + typed[1] + typed[2] + typed[3];
      const Dense u = relu(z * Dense(m.param(l + "mlp_w1")) + bias_rows(m.param(l + "mlp_b1"), n));
      return u * Dense(m.param(l + "mlp_w2")) + bias_rows(m.param(l + "mlp_b2"), n);
    }
    case DetectorVariant::MLP:
      break;
  }
  return {};
}

Eigen::VectorXd oracle_logits(const DetectorModel& m, const InteractionGraph& g, const Matrix& features) {
  const Dense x = features;
  const Eigen::Index n = x.rows();
  Dense h;
  if (m.config.variant == DetectorVariant::MLP) {
    const Dense h1 = relu(x * Dense(m.param("fc1.w")) + bias_rows(m.param("fc1.b"), n));
    h = relu(h1 * Dense(m.param("fc2.w")) + bias_rows(m.param("fc2.b"), n));
  } else {
    h = oracle_layer(m, g, 2, relu(oracle_layer(m, g, 1, x)));
  }
  return (h * Dense(m.param("head.w"))).col(0).array() + m.param("head.b")(0, 0);
}

// Random values everywhere, so biases, attention and epsilon all matter.
DetectorModel perturbed_model(DetectorVariant v, std::uint64_t seed) {
  DetectorConfig cfg = DetectorConfig::defaults(v);
  cfg.hidden = 8;
  cfg.seed = seed;
  DetectorModel m = init_model(cfg);
  Rng rng(seed + 100);
  for (auto& t : m.params) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += rng.uniform(-0.3, 0.3);
  }
  return m;
}

TEST(ForwardTest, MatchesDenseOracle) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto fx = make_gradcheck_fixture(seed);
    for (auto v : {DetectorVariant::GCN, DetectorVariant::SAGE, DetectorVariant::GAT,
                   DetectorVariant::GIN, DetectorVariant::MLP}) {
      const auto m = perturbed_model(v, seed);
      const Vector got = forward(m, fx.graph, fx.features);
      const Eigen::VectorXd want = oracle_logits(m, fx.graph, fx.features);
      ASSERT_EQ(got.size(), want.size());
      for (Eigen::Index i = 0; i < got.size(); ++i) {
        EXPECT_NEAR(got[i], want[i], 1e-10 * (1 + std::abs(want[i]))) << variant_name(v);
      }
    }
  }
}

TEST(ForwardTest, FixtureHasEveryStructuralType) {
  const auto fx = make_gradcheck_fixture(42);
  EXPECT_LE(fx.graph.node_count(), 12u);
  for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
    EXPECT_GT(fx.graph.edge_count(static_cast<EdgeType>(t)), 0u) << t;
  }
  int pos = 0;
  for (int y : fx.labels) pos += y;
  EXPECT_GT(pos, 0);
  EXPECT_LT(pos, static_cast<int>(fx.labels.size()));
}

TEST(LossTest, WeightedMeanBce) {
  const auto fx = make_gradcheck_fixture(5);
  const auto m = perturbed_model(DetectorVariant::GCN, 5);
  std::vector<std::int64_t> rows = {0, 1, 3, 4, 7};
  const double pw = 2.5;
  const Eigen::VectorXd z = oracle_logits(m, fx.graph, fx.features);
  double want = 0;
  for (auto r : rows) {
    const double sp_neg = std::log1p(std::exp(-z[r]));  // -log sigmoid(z)
    const double sp_pos = std::log1p(std::exp(z[r]));   // -log(1 - sigmoid(z))
    want += fx.labels[r] ? pw * sp_neg : sp_pos;
  }
  want /= static_cast<double>(rows.size());
  const auto lg = loss_and_grad(m, fx.graph, fx.features, fx.labels, rows, pw, 3.0);
  EXPECT_NEAR(lg.loss, 3.0 * want, 1e-10);
  ASSERT_EQ(lg.grads.size(), m.params.size());
}

TEST(LossTest, PosWeightIsClassRatio) {
  const std::vector<int> y = {1, 0, 0, 0, 1, 0, 0};
  const std::vector<std::int64_t> rows = {0, 1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(compute_pos_weight(y, rows), 2.0);
  const std::vector<std::int64_t> one_class = {1, 2};
  EXPECT_THROW(compute_pos_weight(y, one_class), UsageError);
}

TEST(GradcheckTest, AllVariantsAgreeWithFiniteDifferences) {
  const auto fx = make_gradcheck_fixture(42);
  for (auto v : {DetectorVariant::GCN, DetectorVariant::SAGE, DetectorVariant::GAT,
                 DetectorVariant::GIN, DetectorVariant::MLP}) {
    DetectorConfig cfg = DetectorConfig::defaults(v);
    const auto m = init_model(cfg);
    const auto report = gradcheck(m, fx.graph, fx.features, fx.labels);
    EXPECT_LT(report.max_relative_error, 1e-4) << variant_name(v) << " worst " << report.worst_tensor;
    EXPECT_EQ(report.per_tensor.size(), m.params.size());
    EXPECT_GT(report.entries_checked, m.params.size());
  }
}

TEST(GradcheckTest, StepShrinksAcrossReluKinks) {
  // At seed 42 one GIN hidden unit sits within 1e-4 of its ReLU kink.
  const auto fx = make_gradcheck_fixture(42);
  const auto m = init_model(DetectorConfig::defaults(DetectorVariant::GIN));
  GradcheckOptions fixed;
  fixed.max_refinements = 0;
  EXPECT_GT(gradcheck(m, fx.graph, fx.features, fx.labels, fixed).max_relative_error, 1e-3);
  const auto refined = gradcheck(m, fx.graph, fx.features, fx.labels);
  EXPECT_GT(refined.refined_entries, 0u);
  EXPECT_LT(refined.max_relative_error, 1e-4);
}

double oracle_loss(const DetectorModel& m, const GradcheckFixture& fx, double pw) {
  const Eigen::VectorXd z = oracle_logits(m, fx.graph, fx.features);
  double total = 0;
  for (Eigen::Index r = 0; r < z.size(); ++r) {
    total += fx.labels[r] ? pw * std::log1p(std::exp(-z[r])) : std::log1p(std::exp(z[r]));
  }
  return total / static_cast<double>(z.size());
}

TEST(GradientTest, MatchesOracleLossDifferences) {
  const auto fx = make_gradcheck_fixture(9);
  std::vector<std::int64_t> rows(fx.labels.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::int64_t>(i);
  for (auto v : {DetectorVariant::GCN, DetectorVariant::SAGE, DetectorVariant::GAT,
                 DetectorVariant::GIN, DetectorVariant::MLP}) {
    auto m = perturbed_model(v, 9);
    const auto lg = loss_and_grad(m, fx.graph, fx.features, fx.labels, rows, 1.5);
    Rng rng(1);
    for (std::size_t t = 0; t < m.params.size(); ++t) {
      for (int k = 0; k < 3; ++k) {
        const auto idx = rng.uniform_int(0, m.params[t].value.size() - 1);
        double& entry = m.params[t].value.data()[idx];
        const double saved = entry, h = 1e-6;
        entry = saved + h;
        const double up = oracle_loss(m, fx, 1.5);
        entry = saved - h;
        const double down = oracle_loss(m, fx, 1.5);
        entry = saved;
        const double numeric = (up - down) / (2 * h);
        EXPECT_NEAR(lg.grads[t].data()[idx], numeric, 1e-6 + 1e-4 * std::abs(numeric))
            << variant_name(v) << " " << m.params[t].name;
      }
    }
  }
}

TEST(InitTest, ParameterShapesAndNames) {
  const auto gcn = init_model(DetectorConfig::defaults(DetectorVariant::GCN));
  EXPECT_EQ(gcn.param("l1.w_self").rows(), 121);
  EXPECT_EQ(gcn.param("l1.w_self").cols(), 128);
  EXPECT_EQ(gcn.param("l2.w_shared_resource").rows(), 128);
  EXPECT_EQ(gcn.param("head.w").rows(), 128);
  EXPECT_TRUE(gcn.param("l1.bias").isZero());
  EXPECT_THROW(gcn.param("l1.w_argument_similarity"), UsageError);
  const auto sage = init_model(DetectorConfig::defaults(DetectorVariant::SAGE));
  EXPECT_EQ(sage.param("l1.w_self").cols(), 64);
  const auto gin = init_model(DetectorConfig::defaults(DetectorVariant::GIN));
  EXPECT_FALSE(gin.param("l1.mlp_w1").isZero());
  EXPECT_EQ(gin.param("l2.epsilon")(0, 0), 0.0);
  const auto mlp = init_model(DetectorConfig::defaults(DetectorVariant::MLP));
  EXPECT_EQ(mlp.param("fc2.w").cols(), 64);
  EXPECT_EQ(mlp.config.batch_size, 200);
  EXPECT_EQ(mlp.config.epochs, 200);
  // Glorot bound.
  const double limit = std::sqrt(6.0 / (121 + 128));
  EXPECT_LE(gcn.param("l1.w_self").cwiseAbs().maxCoeff(), limit);
}

TEST(ConfigTest, NamesAndValidation) {
  EXPECT_EQ(variant_from_name("gcn"), DetectorVariant::GCN);
  EXPECT_EQ(variant_from_name("graphsage"), DetectorVariant::SAGE);
  EXPECT_EQ(variant_from_name("mlp"), DetectorVariant::MLP);
  EXPECT_THROW(variant_from_name("rgcn"), UsageError);
  DetectorConfig cfg = DetectorConfig::defaults(DetectorVariant::GAT);
  cfg.batch_size = 32;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = DetectorConfig::defaults(DetectorVariant::GIN);
  cfg.pos_weight = 3.0;
  const auto back = DetectorConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  Json bad = cfg.to_json();
  bad["dropout"] = 0.5;
  EXPECT_THROW(DetectorConfig::from_json(bad), UsageError);
}

TEST(ForwardTest, NonFiniteParametersAreNumericFaults) {
  const auto fx = make_gradcheck_fixture(1);
  auto m = init_model(DetectorConfig::defaults(DetectorVariant::GCN));
  m.param("head.b")(0, 0) = std::nan("");
  EXPECT_THROW(forward(m, fx.graph, fx.features), NumericFault);
  const Matrix narrow = Matrix::Zero(fx.features.rows(), 5);
  m.param("head.b")(0, 0) = 0;
  EXPECT_THROW(forward(m, fx.graph, narrow), UsageError);
}

TEST(LogisticTest, ClampedAndSymmetric) {
  EXPECT_EQ(logistic(0), 0.5);
  EXPECT_GT(logistic(-1000), 0.0);
  EXPECT_LT(logistic(1000), 1.0);
  EXPECT_NEAR(logistic(2) + logistic(-2), 1.0, 1e-15);
}

// --- training on a small generated corpus -----------------------------------

struct Problem {
  InteractionGraph graph;
  FeatureMatrix features;
  std::vector<int> labels;
  std::vector<std::int64_t> rows;
};

Problem small_problem() {
  GeneratorConfig gen = GeneratorConfig::defaults();
  gen.n_malicious = 12;
  gen.n_benign = 20;
  const Corpus corpus = generate(gen);
  const auto stream = flatten(corpus.chains);
  Problem p{build_graph(stream.events), {}, {}, {}};
  for (const auto& l : label_events(corpus.chains)) p.labels.push_back(l.y);
  for (std::size_t i = 0; i < p.labels.size(); i += 2) p.rows.push_back(static_cast<std::int64_t>(i));
  p.features.vocabulary = build_vocabulary(stream.events);
  const Matrix raw = encode(p.graph, p.features.vocabulary);
  p.features.standardizer = Standardizer::fit(raw, p.rows);
  p.features.rows = p.features.standardizer.apply(raw);
  return p;
}

TEST(TrainTest, LossFallsAndRunsRepeat) {
  const Problem p = small_problem();
  for (auto v : kGraphVariants) {
    DetectorConfig cfg = DetectorConfig::defaults(v);
    cfg.hidden = 32;
    cfg.epochs = 20;
    const auto a = train(cfg, p.graph, p.features, p.labels, p.rows);
    ASSERT_EQ(a.loss_trace.size(), 20u);
    EXPECT_LT(a.loss_trace.back(), a.loss_trace.front()) << variant_name(v);
    EXPECT_DOUBLE_EQ(a.pos_weight, compute_pos_weight(p.labels, p.rows));
    const auto b = train(cfg, p.graph, p.features, p.labels, p.rows);
    for (std::size_t i = 0; i < a.params.size(); ++i) {
      ASSERT_EQ(a.params[i].value, b.params[i].value) << a.params[i].name;
    }
  }
}

TEST(TrainTest, MlpMiniBatches) {
  const Problem p = small_problem();
  DetectorConfig cfg = DetectorConfig::defaults(DetectorVariant::MLP);
  cfg.epochs = 10;
  const auto m = mlp_baseline_train(p.features, p.labels, p.rows, cfg);
  EXPECT_EQ(m.loss_trace.size(), 10u);
  EXPECT_LT(m.loss_trace.back(), m.loss_trace.front());
  const auto preds = mlp_baseline_predict(m, p.features.rows);
  ASSERT_EQ(preds.size(), p.labels.size());
  // The baseline never looks at the graph.
  const auto via_graph = predict(m, InteractionGraph(), p.features.rows);
  for (std::size_t i = 0; i < preds.size(); ++i) EXPECT_EQ(preds[i].p, via_graph[i].p);
}

TEST(TrainTest, HeavierPositiveWeightDoesNotLowerRecall) {
  const Problem p = small_problem();
  auto recall = [&](const DetectorModel& m) {
    const auto preds = predict(m, p.graph, p.features.rows);
    int tp = 0, pos = 0;
    for (auto r : p.rows) {
      if (!p.labels[r]) continue;
      ++pos;
      tp += preds[r].p >= 0.5;
    }
    return static_cast<double>(tp) / pos;
  };
  DetectorConfig cfg = DetectorConfig::defaults(DetectorVariant::GCN);
  cfg.hidden = 32;
  cfg.epochs = 20;
  const double base = compute_pos_weight(p.labels, p.rows);
  cfg.pos_weight = base;
  const double r1 = recall(train(cfg, p.graph, p.features, p.labels, p.rows));
  cfg.pos_weight = 10 * base;
  const double r10 = recall(train(cfg, p.graph, p.features, p.labels, p.rows));
  EXPECT_GE(r10, r1);
}

// No edges: every node is transformed on its own, so permuting the rows
// permutes the logits exactly and a one-node graph gives the same value.
TEST(ForwardTest, IsolatedNodesDoNotInteract) {
  const int n = 8;
  std::vector<ToolUseEvent> nodes(n);
  for (int i = 0; i < n; ++i) {
    nodes[i].event_id = i;
    nodes[i].session_id = "s" + std::to_string(i);
  }
  const auto graph = InteractionGraph::from_parts({}, nodes, {});
  const auto single = InteractionGraph::from_parts({}, {nodes[0]}, {});
  Rng rng(12);
  Matrix x(n, kFeatureDims);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform() * 2 - 1;
  const std::vector<int> perm = {3, 7, 0, 5, 1, 6, 2, 4};
  Matrix xp(n, kFeatureDims);
  for (int i = 0; i < n; ++i) xp.row(i) = x.row(perm[i]);
  for (auto v : kGraphVariants) {
    DetectorConfig cfg = DetectorConfig::defaults(v);
    cfg.hidden = 16;
    const auto m = init_model(cfg);
    const Vector z = forward(m, graph, x);
    const Vector zp = forward(m, graph, xp);
    for (int i = 0; i < n; ++i) {
      EXPECT_EQ(zp[i], z[perm[i]]) << variant_name(v);
      const Vector alone = forward(m, single, x.row(i));
      // A one-row product may take a different kernel; equal up to rounding.
      EXPECT_NEAR(alone[0], z[i], 1e-12 * (1 + std::abs(z[i]))) << variant_name(v);
    }
  }
}

TEST(ForwardTest, GinWithEpsilonMinusOneIgnoresIsolatedInputs) {
  std::vector<ToolUseEvent> nodes(5);
  for (int i = 0; i < 5; ++i) nodes[i].event_id = i;
  const auto graph = InteractionGraph::from_parts({}, nodes, {});
  DetectorConfig cfg = DetectorConfig::defaults(DetectorVariant::GIN);
  cfg.hidden = 16;
  auto m = init_model(cfg);
  m.param("l1.epsilon")(0, 0) = -1.0;
  Rng rng(4);
  Matrix x(5, kFeatureDims);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform() * 4 - 2;
  const Vector z = forward(m, graph, x);
  for (int i = 1; i < 5; ++i) EXPECT_EQ(z[i], z[0]);
}

TEST(SerializationTest, ModelRoundTripKeepsPredictions) {
  const Problem p = small_problem();
  DetectorConfig cfg = DetectorConfig::defaults(DetectorVariant::GAT);
  cfg.hidden = 16;
  cfg.epochs = 3;
  auto m = train(cfg, p.graph, p.features, p.labels, p.rows);
  m.provenance = Json{{"seed", 42}};
  const auto back = read_model(write_model(m));
  EXPECT_EQ(back.config.to_json(), m.config.to_json());
  EXPECT_EQ(back.vocabulary.tools(), m.vocabulary.tools());
  EXPECT_EQ(back.provenance, m.provenance);
  const auto a = predict(m, p.graph, p.features.rows);
  const auto b = predict(back, p.graph, p.features.rows);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i].p, b[i].p);
  EXPECT_THROW(read_model("{\"format\": \"other\"}"), SchemaError);
}

TEST(SerializationTest, PredictionsCsvRoundTrip) {
  std::vector<Prediction> preds = {{0, 0.25}, {1, 1.0 / 3.0}, {2, 0x1.0p-53}};
  const auto text = write_predictions(preds, Json{{"seed", 1}});
  EXPECT_EQ(text.rfind("# {\"seed\":1}\n", 0), 0u);
  const auto back = read_predictions(text);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].event_id, preds[i].event_id);
    EXPECT_EQ(back[i].p, preds[i].p);
  }
  EXPECT_THROW(read_predictions("event_id,p\n1,abc\n"), ParseError);
}

}  // namespace
}  // namespace fraggraph
