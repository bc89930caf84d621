#pragma once

#include <cstddef>
#include <cstdint>

#include "fedia/graph.hpp"
#include "fedia/model.hpp"
#include "fedia/params.hpp"

namespace fedia {

struct LocalOptConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::size_t local_iterations = 5;
  double prox_mu = 0.0;  // 0 disables the FedProx term
};

void validate(const LocalOptConfig& opt);

struct ClientUpdate {
  std::size_t client_id = 0;
  ParameterVector gradient;       // mean of the raw task-loss gradients
  std::size_t sample_count = 0;   // training nodes
  double local_loss = 0.0;        // task loss at the broadcast weights
  ParameterVector final_weights;
};

/// E full-batch SGD steps with momentum (buffer starts at zero), additive
/// weight decay and optional proximal pull toward `w_global`. Only the raw
/// task gradients enter the uploaded mean.
///
/// The optimisation is full-batch and uses no randomness; `seed` is carried
/// so callers can key stochastic variants without changing the signature.
ClientUpdate local_train(const ParameterVector& w_global, const Graph& graph,
                         const ModelConfig& model, const LocalOptConfig& opt,
                         std::uint64_t seed = 0, std::size_t client_id = 0);

/// (w_global - w_local) / lr.
ParameterVector pseudo_gradient(const ParameterVector& w_global, const ParameterVector& w_local,
                                double learning_rate);

}  // namespace fedia
