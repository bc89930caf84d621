#include "fedia/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "fedia/error.hpp"
#include "fedia/rng.hpp"

namespace fedia {

void validate(const ModelConfig& config) {
  if (config.num_layers != 2) throw ValidationError("model.num_layers must be 2");
  if (config.hidden_dim == 0) throw ValidationError("model.hidden_dim must be > 0");
  if (config.feat_dim == 0) throw ValidationError("model.feat_dim must be > 0");
  if (config.num_classes < 1) throw ValidationError("model.num_classes must be >= 1");
}

std::string_view to_string(Backbone b) {
  return b == Backbone::PmlpGcn ? "pmlp_gcn" : "sage_mean";
}

Backbone parse_backbone(std::string_view name) {
  if (name == "pmlp_gcn") return Backbone::PmlpGcn;
  if (name == "sage_mean") return Backbone::SageMean;
  throw ValidationError(fmt::format("unknown backbone '{}' (expected pmlp_gcn or sage_mean)",
                                    std::string(name)));
}

Manifest make_manifest(const ModelConfig& config) {
  validate(config);
  const std::size_t stack = config.backbone == Backbone::SageMean ? 2 : 1;
  const auto classes = static_cast<std::size_t>(config.num_classes);
  return {
      {"layer1.weight", stack * config.feat_dim, config.hidden_dim},
      {"layer1.bias", config.hidden_dim, 1},
      {"layer2.weight", stack * config.hidden_dim, classes},
      {"layer2.bias", classes, 1},
  };
}

ParameterVector init_params(const ModelConfig& config) {
  ParameterVector p(make_manifest(config));
  Rng rng(config.seed);
  for (std::size_t i = 0; i < p.manifest().size(); i += 2) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.manifest()[i].rows));
    for (double& w : p.layer(i)) w = rng.uniform(-bound, bound);
  }
  return p;
}

namespace {

// Symmetric GCN normalisation with a unit self-loop on every node. An input
// self-loop is not counted twice.
Matrix propagate_gcn(const Graph& g, const Matrix& h) {
  std::vector<double> inv_sqrt(g.node_count);
  for (std::size_t v = 0; v < g.node_count; ++v) {
    std::size_t deg = 1;
    for (std::size_t u : g.neighbors(v)) deg += u != v ? 1 : 0;
    inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(deg));
  }
  Matrix out(h.rows(), h.cols());
  for (std::size_t v = 0; v < g.node_count; ++v) {
    auto dst = out.row(v);
    const double self = inv_sqrt[v] * inv_sqrt[v];
    const auto own = h.row(v);
    for (std::size_t j = 0; j < h.cols(); ++j) dst[j] = self * own[j];
    for (std::size_t u : g.neighbors(v)) {
      if (u == v) continue;
      const double w = inv_sqrt[v] * inv_sqrt[u];
      const auto src = h.row(u);
      for (std::size_t j = 0; j < h.cols(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

// [h | mean of neighbours], zero mean for isolated nodes.
Matrix concat_neighbor_mean(const Graph& g, const Matrix& h) {
  const std::size_t d = h.cols();
  Matrix out(h.rows(), 2 * d);
  for (std::size_t v = 0; v < g.node_count; ++v) {
    auto dst = out.row(v);
    const auto own = h.row(v);
    std::copy(own.begin(), own.end(), dst.begin());
    const auto nb = g.neighbors(v);
    if (nb.empty()) continue;
    const double inv = 1.0 / static_cast<double>(nb.size());
    for (std::size_t u : nb) {
      const auto src = h.row(u);
      for (std::size_t j = 0; j < d; ++j) dst[d + j] += src[j];
    }
    for (std::size_t j = 0; j < d; ++j) dst[d + j] *= inv;
  }
  return out;
}

// Gradient w.r.t. h of concat_neighbor_mean, given the gradient of its output.
Matrix concat_neighbor_mean_backward(const Graph& g, const Matrix& grad_out) {
  const std::size_t d = grad_out.cols() / 2;
  Matrix out(grad_out.rows(), d);
  for (std::size_t v = 0; v < g.node_count; ++v) {
    const auto gv = grad_out.row(v);
    auto own = out.row(v);
    for (std::size_t j = 0; j < d; ++j) own[j] += gv[j];
    const auto nb = g.neighbors(v);
    if (nb.empty()) continue;
    const double inv = 1.0 / static_cast<double>(nb.size());
    for (std::size_t u : nb) {
      auto dst = out.row(u);
      for (std::size_t j = 0; j < d; ++j) dst[j] += inv * gv[d + j];
    }
  }
  return out;
}

enum class Mixing { None, Gcn, SageConcat };

Mixing mixing_for(const ModelConfig& config, Mode mode) {
  if (config.backbone == Backbone::SageMean) return Mixing::SageConcat;
  return mode == Mode::Infer ? Mixing::Gcn : Mixing::None;
}

Matrix mix(Mixing m, const Graph& g, const Matrix& h) {
  switch (m) {
    case Mixing::Gcn:
      return propagate_gcn(g, h);
    case Mixing::SageConcat:
      return concat_neighbor_mean(g, h);
    case Mixing::None:
      break;
  }
  return h;
}

Matrix mix_backward(Mixing m, const Graph& g, const Matrix& grad) {
  switch (m) {
    case Mixing::Gcn:
      return propagate_gcn(g, grad);  // the normalised operator is symmetric
    case Mixing::SageConcat:
      return concat_neighbor_mean_backward(g, grad);
    case Mixing::None:
      break;
  }
  return grad;
}

struct Activations {
  Matrix in1;     // mixed input features
  Matrix pre1;    // hidden pre-activation
  Matrix in2;     // mixed hidden representation
  Matrix logits;
};

void add_bias(Matrix& m, std::span<const double> bias) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] += bias[j];
  }
}

void check_inputs(const ParameterVector& params, const Graph& graph, const ModelConfig& config) {
  if (params.manifest() != make_manifest(config)) {
    throw ValidationError(fmt::format("parameter vector ({} values) does not match the model layout",
                                      params.size()));
  }
  if (graph.feat_dim() != config.feat_dim) {
    throw ValidationError(fmt::format("graph has {} features but the model expects {}",
                                      graph.feat_dim(), config.feat_dim));
  }
}

Activations run_forward(const ParameterVector& params, const Graph& graph,
                        const ModelConfig& config, Mode mode) {
  check_inputs(params, graph, config);
  const Mixing m = mixing_for(config, mode);
  const auto classes = static_cast<std::size_t>(config.num_classes);
  Activations a;
  a.in1 = mix(m, graph, graph.features);
  a.pre1 = matmul(a.in1, params.layer(0), config.hidden_dim);
  add_bias(a.pre1, params.layer(1));
  Matrix hidden = a.pre1;
  for (double& x : hidden.data()) x = std::max(x, 0.0);
  a.in2 = mix(m, graph, hidden);
  a.logits = matmul(a.in2, params.layer(2), classes);
  add_bias(a.logits, params.layer(3));
  return a;
}

double log_sum_exp(std::span<const double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (double x : row) s += std::exp(x - mx);
  return mx + std::log(s);
}

std::vector<std::size_t> require_split(const Graph& graph, Split split) {
  auto nodes = graph.nodes_in(split);
  if (nodes.empty()) throw ValidationError("loss/accuracy requested on an empty node split");
  return nodes;
}

}  // namespace

Matrix forward(const ParameterVector& params, const Graph& graph, const ModelConfig& config,
               Mode mode) {
  return run_forward(params, graph, config, mode).logits;
}

double mean_loss(const ParameterVector& params, const Graph& graph, const ModelConfig& config,
                 Split split, Mode mode) {
  const auto nodes = require_split(graph, split);
  const Matrix logits = forward(params, graph, config, mode);
  double total = 0.0;
  for (std::size_t v : nodes) {
    const auto row = logits.row(v);
    total += log_sum_exp(row) - row[static_cast<std::size_t>(graph.labels[v])];
  }
  return total / static_cast<double>(nodes.size());
}

LossAndGrad loss_and_grad(const ParameterVector& params, const Graph& graph,
                          const ModelConfig& config, Split split, Mode mode) {
  const auto nodes = require_split(graph, split);
  const Activations a = run_forward(params, graph, config, mode);
  const Mixing m = mixing_for(config, mode);
  const auto classes = static_cast<std::size_t>(config.num_classes);
  const double inv_m = 1.0 / static_cast<double>(nodes.size());

  LossAndGrad out{0.0, ParameterVector(params.manifest())};
  Matrix d_logits(graph.node_count, classes);
  for (std::size_t v : nodes) {
    const auto row = a.logits.row(v);
    const double lse = log_sum_exp(row);
    const auto y = static_cast<std::size_t>(graph.labels[v]);
    out.loss += lse - row[y];
    auto d = d_logits.row(v);
    for (std::size_t c = 0; c < classes; ++c) d[c] = std::exp(row[c] - lse) * inv_m;
    d[y] -= inv_m;
  }
  out.loss *= inv_m;

  auto& grad = out.grad;
  accumulate_at_b(a.in2, d_logits, grad.layer(2));
  auto db2 = grad.layer(3);
  for (std::size_t v : nodes) {
    const auto d = d_logits.row(v);
    for (std::size_t c = 0; c < classes; ++c) db2[c] += d[c];
  }

  const Matrix d_in2 = matmul_bt(d_logits, params.layer(2), a.in2.cols());
  Matrix d_pre1 = mix_backward(m, graph, d_in2);
  for (std::size_t i = 0; i < d_pre1.data().size(); ++i) {
    if (a.pre1.data()[i] <= 0.0) d_pre1.data()[i] = 0.0;
  }
  accumulate_at_b(a.in1, d_pre1, grad.layer(0));
  auto db1 = grad.layer(1);
  for (std::size_t v = 0; v < graph.node_count; ++v) {
    const auto d = d_pre1.row(v);
    for (std::size_t j = 0; j < config.hidden_dim; ++j) db1[j] += d[j];
  }
  return out;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

double accuracy(const ParameterVector& params, const Graph& graph, const ModelConfig& config,
                Split split) {
  const auto nodes = require_split(graph, split);
  const Matrix logits = forward(params, graph, config, Mode::Infer);
  std::size_t correct = 0;
  for (std::size_t v : nodes) {
    if (argmax(logits.row(v)) == static_cast<std::size_t>(graph.labels[v])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

}  // namespace fedia
