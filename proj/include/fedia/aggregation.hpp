#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedia/params.hpp"

namespace fedia {

using Mask = std::vector<std::uint8_t>;

/// Server-side FedIA state carried across rounds.
struct AggregationState {
  std::vector<double> alpha;  // per-client influence weights, all > 0
  std::optional<Mask> mask_prev;
  std::size_t round = 0;
  double rho = 0.1;
  double lambda = 1.0;
  double beta = 0.0;

  /// Uniform alpha = 1 / clients, no previous mask.
  static AggregationState initial(std::size_t clients, double rho, double lambda, double beta);
};

struct AggregationResult {
  ParameterVector global_gradient;
  Mask mask;
  std::vector<double> weights;  // normalised, sum to 1
  double drift = 0.0;
};

/// Mean of absolute values across clients.
std::vector<double> global_importance(std::span<const ParameterVector> grads);

/// ceil(rho * d), treating products within 1e-9 of an integer as that integer.
std::size_t mask_size(double rho, std::size_t d);

/// Ones at the mask_size(rho, d) largest entries; lower index wins ties.
Mask top_ratio_mask(std::span<const double> importance, double rho);

std::size_t popcount(const Mask& m);

/// 1 - |prev AND cur| / |prev OR cur|; 0 when both are empty.
double mask_drift(const Mask& prev, const Mask& cur);

ParameterVector apply_mask(const ParameterVector& g, const Mask& mask);

struct IrmResult {
  std::vector<double> alpha;    // renormalised to sum 1
  std::vector<double> weights;  // alpha / sum(alpha)
  std::vector<double> deviation;
};

/// Weight update from precomputed deviations: alpha_k * exp(-lambda * d_k),
/// blended as beta * alpha + (1 - beta) * decayed, renormalised to sum 1 and
/// floored at the smallest normal double so every weight stays positive.
IrmResult reweight(std::span<const double> alpha, std::span<const double> deviation,
                   double lambda, double beta);

/// Influence-regularised weighting: d_k is the distance of each masked
/// gradient to their unweighted mean, alpha_k * exp(-lambda * d_k) is blended
/// with the incoming alpha by beta, then renormalised. beta = 0 is the plain
/// multiplicative update.
IrmResult irm_update(std::span<const ParameterVector> masked_grads, std::span<const double> alpha,
                     double lambda, double beta);

/// One FedIA aggregation. With stage2 off (FedIA-p) the masked gradients are
/// weighted by sample count and alpha is left untouched.
std::pair<AggregationResult, AggregationState> aggregate_fedia(
    std::span<const ParameterVector> grads, std::span<const std::size_t> sample_counts,
    const AggregationState& state, bool stage2_enabled);

/// Sample-count weighted mean.
ParameterVector aggregate_fedavg(std::span<const ParameterVector> grads,
                                 std::span<const std::size_t> sample_counts);

std::vector<double> sample_weights(std::span<const std::size_t> sample_counts);

/// w - lr * g.
ParameterVector apply_update(const ParameterVector& w, const ParameterVector& g, double lr);

}  // namespace fedia
