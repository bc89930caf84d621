#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "fedia/graph.hpp"
#include "fedia/params.hpp"
#include "fedia/tensor.hpp"

namespace fedia {

enum class Backbone { PmlpGcn, SageMean };

/// PMLP-GCN trains as a plain MLP and propagates over the graph only in
/// Infer mode. SAGE-mean propagates in both modes.
enum class Mode { Train, Infer };

struct ModelConfig {
  Backbone backbone = Backbone::PmlpGcn;
  std::size_t num_layers = 2;
  std::size_t hidden_dim = 128;
  std::size_t feat_dim = 0;
  int num_classes = 0;
  std::uint64_t seed = 0;
};

void validate(const ModelConfig& config);

std::string_view to_string(Backbone b);
Backbone parse_backbone(std::string_view name);

/// Layer layout: layer1.weight, layer1.bias, layer2.weight, layer2.bias.
/// SAGE weights stack the self rows above the neighbour-mean rows.
Manifest make_manifest(const ModelConfig& config);

/// Fan-in scaled uniform weights, zero biases.
ParameterVector init_params(const ModelConfig& config);

/// Logits [node_count x num_classes].
Matrix forward(const ParameterVector& params, const Graph& graph, const ModelConfig& config,
               Mode mode);

struct LossAndGrad {
  double loss = 0.0;
  ParameterVector grad;
};

/// Mean cross-entropy over the nodes of `split` and its exact gradient.
/// Training uses Mode::Train; other modes are exposed for evaluation and checks.
LossAndGrad loss_and_grad(const ParameterVector& params, const Graph& graph,
                          const ModelConfig& config, Split split, Mode mode = Mode::Train);

/// Loss only; skips the backward pass.
double mean_loss(const ParameterVector& params, const Graph& graph, const ModelConfig& config,
                 Split split, Mode mode);

/// Argmax accuracy (ties go to the lowest class) using the Infer-mode forward.
double accuracy(const ParameterVector& params, const Graph& graph, const ModelConfig& config,
                Split split);

/// Index of the largest entry; the first one wins ties.
std::size_t argmax(std::span<const double> row);

}  // namespace fedia
