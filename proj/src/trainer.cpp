#include "fedia/trainer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fedia/error.hpp"

namespace fedia {

void validate(const LocalOptConfig& opt) {
  if (!(opt.learning_rate > 0.0)) throw ValidationError("local.lr must be > 0");
  if (!(opt.momentum >= 0.0 && opt.momentum < 1.0)) {
    throw ValidationError("local.momentum must be in [0, 1)");
  }
  if (!(opt.weight_decay >= 0.0)) throw ValidationError("local.weight_decay must be >= 0");
  if (opt.local_iterations < 1) throw ValidationError("local.local_iterations must be >= 1");
  if (!(opt.prox_mu >= 0.0)) throw ValidationError("local.prox_mu must be >= 0");
}

ClientUpdate local_train(const ParameterVector& w_global, const Graph& graph,
                         const ModelConfig& model, const LocalOptConfig& opt,
                         std::uint64_t /*seed*/, std::size_t client_id) {
  validate(opt);
  if (w_global.manifest() != make_manifest(model)) {
    throw ValidationError("local_train: global weights do not match the model layout");
  }
  ClientUpdate update;
  update.client_id = client_id;
  update.sample_count = graph.count_in(Split::Train);
  if (update.sample_count == 0) {
    throw ValidationError(fmt::format("client {} has no training nodes", client_id));
  }

  ParameterVector w = w_global;
  ParameterVector velocity(w.manifest());
  ParameterVector grad_sum(w.manifest());
  const std::size_t d = w.size();

  for (std::size_t it = 0; it < opt.local_iterations; ++it) {
    auto [loss, g] = loss_and_grad(w, graph, model, Split::Train, Mode::Train);
    if (!std::isfinite(loss)) {
      throw NumericalError(fmt::format("client {}: non-finite loss at local iteration {}",
                                       client_id, it));
    }
    if (it == 0) update.local_loss = loss;
    for (std::size_t i = 0; i < d; ++i) {
      grad_sum[i] += g[i];
      double step = g[i] + opt.weight_decay * w[i];
      if (opt.prox_mu > 0.0) step += opt.prox_mu * (w[i] - w_global[i]);
      velocity[i] = opt.momentum * velocity[i] + step;
      w[i] -= opt.learning_rate * velocity[i];
    }
  }

  const double inv_e = 1.0 / static_cast<double>(opt.local_iterations);
  for (double& x : grad_sum.values()) x *= inv_e;
  update.gradient = std::move(grad_sum);
  update.final_weights = std::move(w);
  return update;
}

ParameterVector pseudo_gradient(const ParameterVector& w_global, const ParameterVector& w_local,
                                double learning_rate) {
  if (!(learning_rate > 0.0)) throw ValidationError("pseudo_gradient: learning rate must be > 0");
  require_same_layout(w_global, w_local, "pseudo_gradient");
  ParameterVector out(w_global.manifest());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (w_global[i] - w_local[i]) / learning_rate;
  }
  return out;
}

}  // namespace fedia
