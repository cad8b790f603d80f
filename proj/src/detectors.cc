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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <utility>

#include "fraggraph/errors.h"
#include "fraggraph/hashing.h"
#include "fraggraph/rng.h"

namespace fraggraph {
namespace {

using SparseMatrix = MessageOperators::SparseMatrix;
using TypeArray = std::array<Matrix, kStructuralEdgeTypes>;

constexpr std::array<const char*, kStructuralEdgeTypes> kTypeTag = {
    "data_flow", "temporal", "shared_session", "shared_resource"};
constexpr std::string_view kModelFormat = "fraggraph-model";
constexpr int kModelVersion = 1;

bool is_graph_variant(DetectorVariant v) { return v != DetectorVariant::MLP; }

std::string pname(int layer, std::string_view what) {
  return "l" + std::to_string(layer) + "." + std::string(what);
}
std::string wtype(int layer, std::size_t t) {
  return pname(layer, std::string("w_") + kTypeTag[t]);
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& pre, const Matrix& upstream) {
  return (pre.array() > 0.0).select(upstream.array(), 0.0).matrix();
}

Matrix colsum(const Matrix& m) { return m.colwise().sum(); }

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Gradient buffers aligned with a parameter list.
class Grads {
 public:
  explicit Grads(const std::vector<Tensor>& params) : params_(params) {
    for (const auto& t : params) g_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  }
  Matrix& operator[](std::string_view name) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return g_[i];
    }
    throw UsageError("no parameter named " + std::string(name));
  }
  std::vector<Matrix> release() { return std::move(g_); }

 private:
  const std::vector<Tensor>& params_;
  std::vector<Matrix> g_;
};

struct LayerCache {
  const Matrix* x = nullptr;
  const TypeArray* s = nullptr;
  Matrix h;
  TypeArray q;      // GAT per-type transforms
  Matrix alpha;     // GAT attention, N x 4
  Matrix p, z, u;   // GIN
};

struct NetCache {
  LayerCache l1, l2;
  Matrix r1;        // rectified layer-1 output
  TypeArray s2;     // aggregated layer-2 input
  Matrix h2, r2;    // MLP second hidden layer
  Vector logits;
};

TypeArray aggregate(const MessageOperators& ops, const Matrix& x) {
  TypeArray s;
  for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) s[t] = ops.op[t] * x;
  return s;
}

void layer_forward(const DetectorModel& m, int layer,
                   const MessageOperators& ops, LayerCache& c) {
  const Matrix& x = *c.x;
  const TypeArray& s = *c.s;
  switch (m.config.variant) {
    case DetectorVariant::GCN: {
      c.h.noalias() = x * m.param(pname(layer, "w_self"));
      for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
        c.h.noalias() += s[t] * m.param(wtype(layer, t));
      }
      c.h.rowwise() += m.param(pname(layer, "bias")).row(0);
      break;
    }
    case DetectorVariant::SAGE: {
      const Matrix& ws = m.param(pname(layer, "w_self"));
      const Eigen::Index half = ws.cols();
      c.h.resize(x.rows(), 2 * half);
      Matrix self = x * ws;
      self.rowwise() += m.param(pname(layer, "bias_self")).row(0);
      Matrix neigh = Matrix::Zero(x.rows(), half);
      for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
        neigh.noalias() += s[t] * m.param(wtype(layer, t));
      }
      neigh.rowwise() += m.param(pname(layer, "bias_neigh")).row(0);
      c.h.leftCols(half) = self;
      c.h.rightCols(half) = neigh;
      break;
    }
    case DetectorVariant::GAT: {
      const Matrix& g = m.param(pname(layer, "attention"));
      const Eigen::Index n = x.rows();
      c.alpha = Matrix::Zero(n, kStructuralEdgeTypes);
      for (Eigen::Index v = 0; v < n; ++v) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
          if (ops.present(v, t) > 0) peak = std::max(peak, g(0, t));
        }
        double total = 0;
        for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
          if (ops.present(v, t) > 0) {
            c.alpha(v, t) = std::exp(g(0, t) - peak);
            total += c.alpha(v, t);
          }
        }
        if (total > 0) c.alpha.row(v) /= total;
      }
      c.h.noalias() = x * m.param(pname(layer, "w_self"));
      for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
        c.q[t].noalias() = s[t] * m.param(wtype(layer, t));
        c.h.noalias() += c.alpha.col(t).asDiagonal() * c.q[t];
      }
      c.h.rowwise() += m.param(pname(layer, "bias")).row(0);
      break;
    }
    case DetectorVariant::GIN: {
      const double eps = m.param(pname(layer, "epsilon"))(0, 0);
      c.p.noalias() = x * m.param(pname(layer, "w_self"));
      c.z = (1.0 + eps) * c.p;
      for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
        c.z.noalias() += s[t] * m.param(wtype(layer, t));
      }
      c.u.noalias() = c.z * m.param(pname(layer, "mlp_w1"));
      c.u.rowwise() += m.param(pname(layer, "mlp_b1")).row(0);
      c.h.noalias() = relu(c.u) * m.param(pname(layer, "mlp_w2"));
      c.h.rowwise() += m.param(pname(layer, "mlp_b2")).row(0);
      break;
    }
    case DetectorVariant::MLP:
      throw UsageError("MLP has no message-passing layers");
  }
}

// Accumulates parameter gradients; returns dL/dx when `need_dx`.
Matrix layer_backward(const DetectorModel& m, int layer,
                      const MessageOperators& ops, const LayerCache& c,
                      const Matrix& dh, Grads& grads, bool need_dx) {
  const Matrix& x = *c.x;
  const TypeArray& s = *c.s;
  Matrix dx;
  // Gradient reaching the per-type transforms, and its pre-transform form.
  auto propagate = [&](std::size_t t, const Matrix& d_typed) {
    grads[wtype(layer, t)].noalias() += s[t].transpose() * d_typed;
    if (need_dx) {
      dx.noalias() += ops.op_t[t] * (d_typed * m.param(wtype(layer, t)).transpose());
    }
  };
  switch (m.config.variant) {
    case DetectorVariant::GCN: {
      const Matrix& ws = m.param(pname(layer, "w_self"));
      grads[pname(layer, "w_self")].noalias() += x.transpose() * dh;
      grads[pname(layer, "bias")] += colsum(dh);
      if (need_dx) dx.noalias() = dh * ws.transpose();
      for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) propagate(t, dh);
      break;
    }
    case DetectorVariant::SAGE: {
      const Matrix& ws = m.param(pname(layer, "w_self"));
      const Eigen::Index half = ws.cols();
      const Matrix dself = dh.leftCols(half);
      const Matrix dneigh = dh.rightCols(half);
      grads[pname(layer, "w_self")].noalias() += x.transpose() * dself;
      grads[pname(layer, "bias_self")] += colsum(dself);
      grads[pname(layer, "bias_neigh")] += colsum(dneigh);
      if (need_dx) dx.noalias() = dself * ws.transpose();
      for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) propagate(t, dneigh);
      break;
    }
    case DetectorVariant::GAT: {
      const Matrix& ws = m.param(pname(layer, "w_self"));
      grads[pname(layer, "w_self")].noalias() += x.transpose() * dh;
      grads[pname(layer, "bias")] += colsum(dh);
      if (need_dx) dx.noalias() = dh * ws.transpose();
      const Eigen::Index n = x.rows();
      Matrix dalpha(n, kStructuralEdgeTypes);
      for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
        dalpha.col(t) = (dh.array() * c.q[t].array()).rowwise().sum();
        const Matrix dq = c.alpha.col(t).asDiagonal() * dh;
        propagate(t, dq);
      }
      Matrix& dg = grads[pname(layer, "attention")];
      for (Eigen::Index v = 0; v < n; ++v) {
        const double mixed = c.alpha.row(v).dot(dalpha.row(v));
        for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
          dg(0, t) += c.alpha(v, t) * (dalpha(v, t) - mixed);
        }
      }
      break;
    }
    case DetectorVariant::GIN: {
      const double eps = m.param(pname(layer, "epsilon"))(0, 0);
      const Matrix r = relu(c.u);
      grads[pname(layer, "mlp_w2")].noalias() += r.transpose() * dh;
      grads[pname(layer, "mlp_b2")] += colsum(dh);
      const Matrix du =
          relu_mask(c.u, dh * m.param(pname(layer, "mlp_w2")).transpose());
      grads[pname(layer, "mlp_w1")].noalias() += c.z.transpose() * du;
      grads[pname(layer, "mlp_b1")] += colsum(du);
      const Matrix dz = du * m.param(pname(layer, "mlp_w1")).transpose();
      grads[pname(layer, "epsilon")](0, 0) += (dz.array() * c.p.array()).sum();
      grads[pname(layer, "w_self")].noalias() += (1.0 + eps) * (x.transpose() * dz);
      if (need_dx) {
        dx.noalias() = (1.0 + eps) * (dz * m.param(pname(layer, "w_self")).transpose());
      }
      for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) propagate(t, dz);
      break;
    }
    case DetectorVariant::MLP:
      throw UsageError("MLP has no message-passing layers");
  }
  return dx;
}

void check_finite_params(const DetectorModel& m, std::string_view when) {
  for (const auto& t : m.params) {
    if (!t.value.allFinite()) {
      throw NumericFault("non-finite values in parameter '" + t.name + "' " +
                         std::string(when));
    }
  }
}

// Prepared inputs for one (model variant, graph, features) triple. Layer-1
// aggregation depends only on the fixed features, so it is done once.
struct Prepared {
  const Matrix* x = nullptr;
  MessageOperators ops;
  TypeArray s1;
};

Prepared prepare(const DetectorModel& m, const InteractionGraph& graph,
                 const Matrix& features) {
  if (features.cols() != static_cast<Eigen::Index>(kFeatureDims)) {
    throw UsageError("feature matrix must have 121 columns, got " +
                     std::to_string(features.cols()));
  }
  Prepared p;
  p.x = &features;
  if (is_graph_variant(m.config.variant)) {
    if (features.rows() != static_cast<Eigen::Index>(graph.node_count())) {
      throw UsageError("feature rows do not match graph nodes");
    }
    p.ops = MessageOperators::build(graph, m.config.variant);
    p.s1 = aggregate(p.ops, features);
  }
  return p;
}

void net_forward(const DetectorModel& m, const Prepared& in, NetCache& c) {
  if (m.config.variant == DetectorVariant::MLP) {
    Matrix h1 = *in.x * m.param("fc1.w");
    h1.rowwise() += m.param("fc1.b").row(0);
    c.l1.h = std::move(h1);
    c.r1 = relu(c.l1.h);
    c.h2.noalias() = c.r1 * m.param("fc2.w");
    c.h2.rowwise() += m.param("fc2.b").row(0);
    c.r2 = relu(c.h2);
    c.logits = (c.r2 * m.param("head.w")).col(0);
  } else {
    c.l1.x = in.x;
    c.l1.s = &in.s1;
    layer_forward(m, 1, in.ops, c.l1);
    c.r1 = relu(c.l1.h);
    c.s2 = aggregate(in.ops, c.r1);
    c.l2.x = &c.r1;
    c.l2.s = &c.s2;
    layer_forward(m, 2, in.ops, c.l2);
    c.logits = (c.l2.h * m.param("head.w")).col(0);
  }
  c.logits.array() += m.param("head.b")(0, 0);
}

void net_backward(const DetectorModel& m, const Prepared& in, const NetCache& c,
                  const Vector& dlogits, Grads& grads) {
  const Matrix dz = dlogits;  // N x 1
  grads["head.b"](0, 0) += dlogits.sum();
  if (m.config.variant == DetectorVariant::MLP) {
    grads["head.w"].noalias() += c.r2.transpose() * dz;
    const Matrix dh2 = relu_mask(c.h2, dz * m.param("head.w").transpose());
    grads["fc2.w"].noalias() += c.r1.transpose() * dh2;
    grads["fc2.b"] += colsum(dh2);
    const Matrix dh1 = relu_mask(c.l1.h, dh2 * m.param("fc2.w").transpose());
    grads["fc1.w"].noalias() += in.x->transpose() * dh1;
    grads["fc1.b"] += colsum(dh1);
    return;
  }
  grads["head.w"].noalias() += c.l2.h.transpose() * dz;
  const Matrix dh2 = dz * m.param("head.w").transpose();
  const Matrix dr1 = layer_backward(m, 2, in.ops, c.l2, dh2, grads, true);
  const Matrix dh1 = relu_mask(c.l1.h, dr1);
  layer_backward(m, 1, in.ops, c.l1, dh1, grads, false);
}

// Loss over `rows` and dL/dlogit for every node.
double bce_loss(const Vector& logits, std::span<const int> labels,
                std::span<const std::int64_t> rows, double pos_weight,
                double scale, Vector* dlogits) {
  if (dlogits) *dlogits = Vector::Zero(logits.size());
  const double inv = scale / static_cast<double>(rows.size());
  double loss = 0;
  for (auto r : rows) {
    const double z = logits[r];
    const double y = labels[r];
    loss += pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
    if (dlogits) {
      const double p = logistic(z);
      (*dlogits)[r] = inv * (pos_weight * y * (p - 1.0) + (1.0 - y) * p);
    }
  }
  return loss * inv;
}

void add_tensor(std::vector<Tensor>& params, std::string name, Eigen::Index rows,
                Eigen::Index cols) {
  params.push_back(Tensor{std::move(name), Matrix::Zero(rows, cols)});
}

void check_rows(std::span<const int> labels, std::span<const std::int64_t> rows,
                Eigen::Index n) {
  if (rows.empty()) throw UsageError("empty training mask");
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw UsageError("labels do not match feature rows");
  }
  for (auto r : rows) {
    if (r < 0 || r >= n) throw UsageError("training row out of range");
  }
}

}  // namespace

const char* variant_name(DetectorVariant variant) {
  switch (variant) {
    case DetectorVariant::GCN: return "gcn";
    case DetectorVariant::SAGE: return "sage";
    case DetectorVariant::GAT: return "gat";
    case DetectorVariant::GIN: return "gin";
    case DetectorVariant::MLP: return "mlp";
  }
  return "unknown";
}

DetectorVariant variant_from_name(std::string_view name) {
  for (auto v : {DetectorVariant::GCN, DetectorVariant::SAGE, DetectorVariant::GAT,
                 DetectorVariant::GIN, DetectorVariant::MLP}) {
    if (name == variant_name(v)) return v;
  }
  if (name == "graphsage") return DetectorVariant::SAGE;
  throw UsageError("unknown detector variant '" + std::string(name) + "'");
}

DetectorConfig DetectorConfig::defaults(DetectorVariant variant) {
  DetectorConfig c;
  c.variant = variant;
  if (variant == DetectorVariant::MLP) {
    c.epochs = 200;
    c.batch_size = 200;
  }
  return c;
}

void DetectorConfig::validate() const {
  if (hidden < 2 || hidden % 2 != 0) throw UsageError("hidden must be even and >= 2");
  if (layers != 2) throw UsageError("only two message-passing layers are supported");
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (!(learning_rate > 0)) throw UsageError("learning_rate must be > 0");
  if (weight_decay < 0) throw UsageError("weight_decay must be >= 0");
  if (pos_weight && !(*pos_weight > 0)) throw UsageError("pos_weight must be > 0");
  if (batch_size < 0) throw UsageError("batch_size must be >= 0");
  if (batch_size > 0 && variant != DetectorVariant::MLP) {
    throw UsageError("mini-batches are only supported for the mlp variant");
  }
}

Json DetectorConfig::to_json() const {
  Json j = Json::object();
  j["variant"] = variant_name(variant);
  j["hidden"] = hidden;
  j["layers"] = layers;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["weight_decay"] = weight_decay;
  j["pos_weight"] = pos_weight ? Json(*pos_weight) : Json(nullptr);
  j["seed"] = seed;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_epsilon"] = adam_epsilon;
  j["batch_size"] = batch_size;
  return j;
}

DetectorConfig DetectorConfig::from_json(const Json& j) {
  DetectorConfig c = defaults(variant_from_name(j.at("variant").get<std::string>()));
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    if (k == "variant") continue;
    if (k == "hidden") c.hidden = v.get<int>();
    else if (k == "layers") c.layers = v.get<int>();
    else if (k == "epochs") c.epochs = v.get<int>();
    else if (k == "learning_rate") c.learning_rate = v.get<double>();
    else if (k == "weight_decay") c.weight_decay = v.get<double>();
    else if (k == "pos_weight") c.pos_weight = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "beta1") c.beta1 = v.get<double>();
    else if (k == "beta2") c.beta2 = v.get<double>();
    else if (k == "adam_epsilon") c.adam_epsilon = v.get<double>();
    else if (k == "batch_size") c.batch_size = v.get<int>();
    else throw UsageError("unknown detector key '" + k + "'");
  }
  c.validate();
  return c;
}

MessageOperators MessageOperators::build(const InteractionGraph& graph,
                                         DetectorVariant variant) {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  MessageOperators ops;
  ops.present = Matrix::Zero(n, kStructuralEdgeTypes);
  for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
    std::vector<double> degree(n, 0.0);
    std::vector<Eigen::Triplet<double>> entries;
    for (const auto& e : graph.edges()) {
      if (static_cast<std::size_t>(e.etype) != t) continue;
      entries.emplace_back(e.dst, e.src, 1.0);
      entries.emplace_back(e.src, e.dst, 1.0);
      degree[e.src] += 1.0;
      degree[e.dst] += 1.0;
    }
    for (auto& entry : entries) {
      const auto v = entry.row();
      const auto u = entry.col();
      double w = 1.0;
      if (variant == DetectorVariant::GCN) {
        w = 1.0 / std::sqrt((degree[v] + 1.0) * (degree[u] + 1.0));
      } else if (variant == DetectorVariant::SAGE || variant == DetectorVariant::GAT) {
        w = 1.0 / degree[v];
      }
      entry = Eigen::Triplet<double>(v, u, w);
    }
    ops.op[t].resize(n, n);
    ops.op[t].setFromTriplets(entries.begin(), entries.end());
    ops.op_t[t] = ops.op[t].transpose();
    for (Eigen::Index v = 0; v < n; ++v) {
      if (degree[v] > 0) ops.present(v, t) = 1.0;
    }
  }
  return ops;
}

const Matrix& DetectorModel::param(std::string_view name) const {
  for (const auto& t : params) {
    if (t.name == name) return t.value;
  }
  throw UsageError("model has no parameter '" + std::string(name) + "'");
}

Matrix& DetectorModel::param(std::string_view name) {
  return const_cast<Matrix&>(std::as_const(*this).param(name));
}

double logistic(double logit) {
  constexpr double kLo = 0x1.0p-53;
  constexpr double kHi = 1.0 - 0x1.0p-53;
  if (std::isnan(logit)) return logit;
  const double p = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                              : std::exp(logit) / (1.0 + std::exp(logit));
  return std::clamp(p, kLo, kHi);
}

DetectorModel init_model(const DetectorConfig& config) {
  config.validate();
  DetectorModel m;
  m.config = config;
  const Eigen::Index d = static_cast<Eigen::Index>(kFeatureDims);
  const Eigen::Index h = config.hidden;
  auto& P = m.params;
  if (config.variant == DetectorVariant::MLP) {
    add_tensor(P, "fc1.w", d, h);
    add_tensor(P, "fc1.b", 1, h);
    add_tensor(P, "fc2.w", h, h / 2);
    add_tensor(P, "fc2.b", 1, h / 2);
    add_tensor(P, "head.w", h / 2, 1);
  } else {
    for (int layer = 1; layer <= 2; ++layer) {
      const Eigen::Index in = layer == 1 ? d : h;
      const Eigen::Index out = config.variant == DetectorVariant::SAGE ? h / 2 : h;
      add_tensor(P, pname(layer, "w_self"), in, out);
      for (std::size_t t = 0; t < kStructuralEdgeTypes; ++t) {
        add_tensor(P, wtype(layer, t), in, out);
      }
      switch (config.variant) {
        case DetectorVariant::GCN:
          add_tensor(P, pname(layer, "bias"), 1, h);
          break;
        case DetectorVariant::SAGE:
          add_tensor(P, pname(layer, "bias_self"), 1, h / 2);
          add_tensor(P, pname(layer, "bias_neigh"), 1, h / 2);
          break;
        case DetectorVariant::GAT:
          add_tensor(P, pname(layer, "bias"), 1, h);
          add_tensor(P, pname(layer, "attention"), 1, kStructuralEdgeTypes);
          break;
        case DetectorVariant::GIN:
          add_tensor(P, pname(layer, "epsilon"), 1, 1);
          add_tensor(P, pname(layer, "mlp_w1"), h, h);
          add_tensor(P, pname(layer, "mlp_b1"), 1, h);
          add_tensor(P, pname(layer, "mlp_w2"), h, h);
          add_tensor(P, pname(layer, "mlp_b2"), 1, h);
          break;
        case DetectorVariant::MLP:
          break;
      }
    }
    add_tensor(P, "head.w", h, 1);
  }
  add_tensor(P, "head.b", 1, 1);

  Rng rng(config.seed);
  for (auto& t : P) {
    // Biases, attention logits and epsilon start at zero.
    const auto dot = t.name.rfind('.');
    const std::string_view leaf = std::string_view(t.name).substr(dot + 1);
    if (leaf != "w" && !leaf.starts_with("w_") && !leaf.starts_with("mlp_w")) continue;
    const double limit =
        std::sqrt(6.0 / static_cast<double>(t.value.rows() + t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
        t.value(i, j) = rng.uniform(-limit, limit);
      }
    }
  }
  return m;
}

Vector forward(const DetectorModel& model, const InteractionGraph& graph,
               const Matrix& features) {
  check_finite_params(model, "before forward pass");
  const Prepared in = prepare(model, graph, features);
  NetCache cache;
  net_forward(model, in, cache);
  return cache.logits;
}

double compute_pos_weight(std::span<const int> labels,
                          std::span<const std::int64_t> rows) {
  double pos = 0, neg = 0;
  for (auto r : rows) (labels[r] ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) {
    throw UsageError("training mask must contain both classes (pos_weight undefined)");
  }
  return neg / pos;
}

LossAndGrad loss_and_grad(const DetectorModel& model,
                          const InteractionGraph& graph,
                          const Matrix& features, std::span<const int> labels,
                          std::span<const std::int64_t> rows,
                          double pos_weight, double scale) {
  check_rows(labels, rows, features.rows());
  const Prepared in = prepare(model, graph, features);
  NetCache cache;
  net_forward(model, in, cache);
  Vector dlogits;
  LossAndGrad out;
  out.loss = bce_loss(cache.logits, labels, rows, pos_weight, scale, &dlogits);
  Grads grads(model.params);
  net_backward(model, in, cache, dlogits, grads);
  out.grads = grads.release();
  return out;
}

DetectorModel train(const DetectorConfig& config, const InteractionGraph& graph,
                    const FeatureMatrix& features, std::span<const int> labels,
                    std::span<const std::int64_t> train_rows) {
  check_rows(labels, train_rows, features.rows.rows());
  DetectorModel m = init_model(config);
  m.standardizer = features.standardizer;
  m.vocabulary = features.vocabulary;
  m.pos_weight = config.pos_weight ? *config.pos_weight
                                   : compute_pos_weight(labels, train_rows);

  std::vector<Matrix> first(m.params.size()), second(m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    first[i] = Matrix::Zero(m.params[i].value.rows(), m.params[i].value.cols());
    second[i] = first[i];
  }
  double b1_power = 1.0, b2_power = 1.0;
  auto adam_step = [&](std::vector<Matrix>& g, int epoch) {
    b1_power *= config.beta1;
    b2_power *= config.beta2;
    const double c1 = 1.0 / (1.0 - b1_power);
    const double c2 = 1.0 / (1.0 - b2_power);
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      if (!g[i].allFinite()) {
        throw NumericFault("non-finite gradient for '" + m.params[i].name +
                           "' at epoch " + std::to_string(epoch));
      }
      Matrix& p = m.params[i].value;
      p *= (1.0 - config.learning_rate * config.weight_decay);
      first[i] = config.beta1 * first[i] + (1.0 - config.beta1) * g[i];
      second[i] = config.beta2 * second[i] +
                  (1.0 - config.beta2) * g[i].cwiseProduct(g[i]);
      p.array() -= config.learning_rate * (first[i].array() * c1) /
                   ((second[i].array() * c2).sqrt() + config.adam_epsilon);
    }
  };

  if (config.batch_size > 0) {
    // Mini-batch path (feature-only models): each batch is its own matrix.
    std::vector<std::int64_t> order(train_rows.begin(), train_rows.end());
    Rng shuffler(config.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      shuffler.shuffle(order);
      double total = 0;
      for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t n = std::min(bs, order.size() - start);
        Matrix xb(static_cast<Eigen::Index>(n), features.rows.cols());
        std::vector<int> yb(n);
        std::vector<std::int64_t> local(n);
        for (std::size_t k = 0; k < n; ++k) {
          xb.row(static_cast<Eigen::Index>(k)) = features.rows.row(order[start + k]);
          yb[k] = labels[order[start + k]];
          local[k] = static_cast<std::int64_t>(k);
        }
        const Prepared in = prepare(m, graph, xb);
        NetCache cache;
        net_forward(m, in, cache);
        Vector dlogits;
        total += static_cast<double>(n) *
                 bce_loss(cache.logits, yb, local, m.pos_weight, 1.0, &dlogits);
        Grads grads(m.params);
        net_backward(m, in, cache, dlogits, grads);
        auto g = grads.release();
        adam_step(g, epoch);
      }
      const double loss = total / static_cast<double>(order.size());
      if (!std::isfinite(loss)) {
        throw NumericFault("non-finite training loss at epoch " + std::to_string(epoch));
      }
      m.loss_trace.push_back(loss);
      check_finite_params(m, "after epoch " + std::to_string(epoch));
    }
    return m;
  }

  const Prepared in = prepare(m, graph, features.rows);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    NetCache cache;
    net_forward(m, in, cache);
    Vector dlogits;
    const double loss =
        bce_loss(cache.logits, labels, train_rows, m.pos_weight, 1.0, &dlogits);
    if (!std::isfinite(loss)) {
      throw NumericFault("non-finite training loss at epoch " + std::to_string(epoch));
    }
    m.loss_trace.push_back(loss);
    Grads grads(m.params);
    net_backward(m, in, cache, dlogits, grads);
    auto g = grads.release();
    adam_step(g, epoch);
    check_finite_params(m, "after epoch " + std::to_string(epoch));
  }
  return m;
}

std::vector<Prediction> predict(const DetectorModel& model,
                                const InteractionGraph& graph,
                                const Matrix& features) {
  const Vector logits = forward(model, graph, features);
  std::vector<Prediction> out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    out[i] = Prediction{static_cast<std::int64_t>(i), logistic(logits[i])};
  }
  return out;
}

DetectorModel mlp_baseline_train(const FeatureMatrix& features,
                                 std::span<const int> labels,
                                 std::span<const std::int64_t> train_rows,
                                 DetectorConfig config) {
  if (config.variant != DetectorVariant::MLP) {
    throw UsageError("mlp_baseline_train requires the mlp variant");
  }
  const InteractionGraph empty;
  return train(config, empty, features, labels, train_rows);
}

std::vector<Prediction> mlp_baseline_predict(const DetectorModel& model,
                                             const Matrix& features) {
  if (model.config.variant != DetectorVariant::MLP) {
    throw UsageError("mlp_baseline_predict requires an mlp model");
  }
  const InteractionGraph empty;
  return predict(model, empty, features);
}

GradcheckFixture make_gradcheck_fixture(std::uint64_t seed, int nodes) {
  if (nodes < 2 || nodes > 12) throw UsageError("fixture size must be in [2, 12]");
  Rng rng(seed);
  const char* const tools[] = {"read_file", "write_file", "run_command", "fetch_url"};
  std::vector<ToolUseEvent> events;
  const int per_session = (nodes + 2) / 3;
  for (int i = 0; i < nodes; ++i) {
    const int session = i / per_session;
    const int pos = i % per_session;
    ToolUseEvent e;
    e.event_id = i;
    e.session_id = "fixture/s" + std::to_string(session);
    e.user_id = "fixture";
    e.seq = pos + 1;
    e.iteration = pos / 2 + 1;
    e.kind = pos % 2 == 0 ? EventKind::ToolCall : EventKind::ToolResult;
    e.tool = tools[rng.uniform_int(0, 3)];
    e.arguments = "path /data/shared/f" + std::to_string(rng.uniform_int(0, 2)) + ".txt";
    if (e.is_call()) {
      e.call_index = pos / 2;
      e.request_bytes = rng.uniform_int(10, 2000);
    } else {
      e.result_index = pos / 2;
      e.response_bytes = rng.uniform_int(10, 2000);
      e.success = rng.bernoulli(0.8);
    }
    events.push_back(std::move(e));
  }
  GradcheckFixture f{build_graph(events), Matrix(), std::vector<int>(nodes)};
  const ToolVocabulary vocab = build_vocabulary(events);
  const Matrix raw = encode(f.graph, vocab);
  std::vector<std::int64_t> all(nodes);
  for (int i = 0; i < nodes; ++i) all[i] = i;
  f.features = Standardizer::fit(raw, all).apply(raw);
  // Jitter breaks ties between otherwise identical rows.
  for (Eigen::Index i = 0; i < f.features.size(); ++i) {
    f.features.data()[i] += rng.uniform(-0.1, 0.1);
  }
  for (int i = 0; i < nodes; ++i) f.labels[i] = rng.bernoulli(0.4) ? 1 : 0;
  f.labels[0] = 1;
  f.labels[1] = 0;
  return f;
}

GradcheckReport gradcheck(const DetectorModel& model,
                          const InteractionGraph& graph, const Matrix& features,
                          std::span<const int> labels,
                          const GradcheckOptions& options) {
  if (features.rows() > 12) throw UsageError("gradcheck expects at most 12 nodes");
  std::vector<std::int64_t> rows(features.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::int64_t>(i);
  // Fixed so that a single-class fixture still has a defined loss.
  const double pos_weight = 1.5;
  const LossAndGrad analytic = loss_and_grad(model, graph, features, labels, rows,
                                             pos_weight, options.loss_scale);
  DetectorModel probe = model;
  Rng rng(options.seed);
  GradcheckReport report;
  for (std::size_t i = 0; i < probe.params.size(); ++i) {
    Matrix& value = probe.params[i].value;
    const Matrix& grad = analytic.grads[i];
    std::vector<Eigen::Index> picks;
    const Eigen::Index size = value.size();
    if (static_cast<std::size_t>(size) <= options.samples_per_tensor) {
      for (Eigen::Index k = 0; k < size; ++k) picks.push_back(k);
    } else {
      Eigen::Index largest = 0;
      grad.cwiseAbs().reshaped<Eigen::RowMajor>().maxCoeff(&largest);
      picks.push_back(largest);
      while (picks.size() < options.samples_per_tensor) {
        picks.push_back(static_cast<Eigen::Index>(rng.uniform_int(0, size - 1)));
      }
    }
    double worst = 0;
    for (Eigen::Index k : picks) {
      double& entry = value.data()[k];
      const double saved = entry;
      auto central = [&](double h) {
        entry = saved + h;
        const double up = loss_and_grad(probe, graph, features, labels, rows,
                                        pos_weight, options.loss_scale).loss;
        entry = saved - h;
        const double down = loss_and_grad(probe, graph, features, labels, rows,
                                          pos_weight, options.loss_scale).loss;
        entry = saved;
        return (up - down) / (2.0 * h);
      };
      // Where the loss is smooth, a ten times smaller step gives the same
      // estimate. If not, the interval straddles a ReLU kink; shrink it.
      double h = options.step;
      double numeric = central(h);
      for (int refine = 0; refine < options.max_refinements; ++refine) {
        const double finer = central(h / 10.0);
        const double gap = std::abs(finer - numeric) /
                           std::max({std::abs(finer), std::abs(numeric), 1e-6});
        if (gap < 1e-4) break;
        h /= 10.0;
        numeric = finer;
        ++report.refined_entries;
      }
      const double a = grad.data()[k];
      if (!std::isfinite(a) || !std::isfinite(numeric)) {
        throw NumericFault("non-finite gradient in gradcheck for " + probe.params[i].name);
      }
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, rel);
      ++report.entries_checked;
    }
    report.per_tensor.emplace_back(probe.params[i].name, worst);
    if (worst >= report.max_relative_error) {
      report.max_relative_error = worst;
      report.worst_tensor = probe.params[i].name;
    }
  }
  return report;
}

std::string write_model(const DetectorModel& model) {
  Json j = Json::object();
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["variant"] = variant_name(model.config.variant);
  j["config"] = model.config.to_json();
  j["seed"] = model.config.seed;
  j["pos_weight"] = model.pos_weight;
  j["vocabulary_hash"] = hex64(model.vocabulary.hash());
  j["vocabulary"] = model.vocabulary.tools();
  j["standardizer"] = model.standardizer.to_json();
  j["provenance"] = model.provenance;
  j["loss_trace"] = model.loss_trace;
  Json tensors = Json::array();
  for (const auto& t : model.params) {
    Json entry = Json::object();
    entry["name"] = t.name;
    entry["rows"] = t.value.rows();
    entry["cols"] = t.value.cols();
    entry["data"] = std::vector<double>(t.value.data(), t.value.data() + t.value.size());
    tensors.push_back(std::move(entry));
  }
  j["tensors"] = std::move(tensors);
  return j.dump() + "\n";
}

DetectorModel read_model(std::string_view text) {
  Json j = Json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("model file is not JSON", 1);
  if (j.value("format", "") != kModelFormat || j.value("version", 0) != kModelVersion) {
    throw SchemaError("unsupported model file format");
  }
  DetectorModel m = init_model(DetectorConfig::from_json(j.at("config")));
  m.pos_weight = j.at("pos_weight").get<double>();
  m.vocabulary = ToolVocabulary(j.at("vocabulary").get<std::vector<std::string>>());
  if (hex64(m.vocabulary.hash()) != j.at("vocabulary_hash").get<std::string>()) {
    throw SchemaError("model vocabulary hash mismatch");
  }
  m.standardizer = Standardizer::from_json(j.at("standardizer"));
  m.provenance = j.at("provenance");
  m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  const Json& tensors = j.at("tensors");
  if (tensors.size() != m.params.size()) throw SchemaError("model tensor count mismatch");
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const Json& t = tensors[i];
    Tensor& p = m.params[i];
    if (t.at("name").get<std::string>() != p.name ||
        t.at("rows").get<Eigen::Index>() != p.value.rows() ||
        t.at("cols").get<Eigen::Index>() != p.value.cols()) {
      throw SchemaError("model tensor '" + p.name + "' has unexpected layout");
    }
    const auto data = t.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != p.value.size()) {
      throw SchemaError("model tensor '" + p.name + "' has wrong size");
    }
    std::copy(data.begin(), data.end(), p.value.data());
  }
  return m;
}

std::string write_predictions(const std::vector<Prediction>& predictions,
                              const Json& provenance) {
  std::string out;
  if (!provenance.is_null()) out += "# " + provenance.dump() + "\n";
  out += "event_id,p\n";
  char buf[64];
  for (const auto& p : predictions) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g\n",
                  static_cast<long long>(p.event_id), p.p);
    out += buf;
  }
  return out;
}

std::vector<Prediction> read_predictions(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<Prediction> out;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line == "event_id,p") continue;
    long long id = 0;
    double p = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf", &id, &p) != 2) {
      throw ParseError("bad prediction row", line_no);
    }
    out.push_back(Prediction{id, p});
  }
  return out;
}

}  // namespace fraggraph
