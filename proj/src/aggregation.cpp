#include "fedia/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "fedia/error.hpp"

namespace fedia {

AggregationState AggregationState::initial(std::size_t clients, double rho, double lambda,
                                           double beta) {
  AggregationState s;
  s.alpha.assign(clients, clients == 0 ? 0.0 : 1.0 / static_cast<double>(clients));
  s.rho = rho;
  s.lambda = lambda;
  s.beta = beta;
  return s;
}

namespace {

void require_gradients(std::span<const ParameterVector> grads, const char* what) {
  if (grads.empty()) throw ValidationError(fmt::format("{}: no client gradients", what));
  for (const auto& g : grads.subspan(1)) require_same_layout(grads.front(), g, what);
}

}  // namespace

std::vector<double> global_importance(std::span<const ParameterVector> grads) {
  require_gradients(grads, "global_importance");
  std::vector<double> out(grads.front().size(), 0.0);
  for (const auto& g : grads) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += std::abs(g[i]);
  }
  const double inv = 1.0 / static_cast<double>(grads.size());
  for (double& x : out) x *= inv;
  return out;
}

std::size_t mask_size(double rho, std::size_t d) {
  const double x = rho * static_cast<double>(d);
  const double nearest = std::round(x);
  const double k = std::abs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
  return std::clamp(static_cast<std::size_t>(k), std::size_t{1}, d);
}

Mask top_ratio_mask(std::span<const double> importance, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw ValidationError(fmt::format("mask ratio {} outside (0, 1]", rho));
  }
  const std::size_t d = importance.size();
  if (d == 0) throw ValidationError("top_ratio_mask: empty importance vector");
  const std::size_t k = mask_size(rho, d);
  Mask mask(d, 0);
  if (k == d) {
    std::fill(mask.begin(), mask.end(), 1);
    return mask;
  }
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    return importance[a] > importance[b] || (importance[a] == importance[b] && a < b);
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), before);
  for (std::size_t i = 0; i < k; ++i) mask[idx[i]] = 1;
  return mask;
}

std::size_t popcount(const Mask& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

double mask_drift(const Mask& prev, const Mask& cur) {
  if (prev.size() != cur.size()) {
    throw ValidationError(fmt::format("mask_drift: length {} vs {}", prev.size(), cur.size()));
  }
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    both += (prev[i] && cur[i]) ? 1 : 0;
    either += (prev[i] || cur[i]) ? 1 : 0;
  }
  if (either == 0) return 0.0;
  return 1.0 - static_cast<double>(both) / static_cast<double>(either);
}

ParameterVector apply_mask(const ParameterVector& g, const Mask& mask) {
  if (mask.size() != g.size()) throw ValidationError("apply_mask: length mismatch");
  ParameterVector out(g.manifest());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = mask[i] ? g[i] : 0.0;
  return out;
}

IrmResult irm_update(std::span<const ParameterVector> masked_grads, std::span<const double> alpha,
                     double lambda, double beta) {
  require_gradients(masked_grads, "irm_update");
  const std::size_t clients = masked_grads.size();
  if (alpha.size() != clients) {
    throw ValidationError(fmt::format("irm_update: {} weights for {} clients", alpha.size(), clients));
  }

  const std::size_t d = masked_grads.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& g : masked_grads) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(clients);
  for (double& x : mean) x *= inv;

  std::vector<double> deviation(clients);
  for (std::size_t k = 0; k < clients; ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = masked_grads[k][i] - mean[i];
      sq += diff * diff;
    }
    deviation[k] = std::sqrt(sq);
    if (!std::isfinite(deviation[k])) {
      throw NumericalError(fmt::format("irm_update: non-finite deviation for client {}", k));
    }
  }
  return reweight(alpha, deviation, lambda, beta);
}

IrmResult reweight(std::span<const double> alpha, std::span<const double> deviation,
                   double lambda, double beta) {
  const std::size_t clients = alpha.size();
  if (deviation.size() != clients) throw ValidationError("reweight: length mismatch");
  if (clients == 0) throw ValidationError("reweight: no clients");
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("reweight: alpha must be > 0");
  }
  for (double d : deviation) {
    if (!std::isfinite(d)) throw NumericalError("reweight: non-finite deviation");
  }
  if (!(lambda >= 0.0)) throw ValidationError("reweight: lambda must be >= 0");
  if (!(beta >= 0.0 && beta < 1.0)) throw ValidationError("reweight: beta must be in [0, 1)");

  IrmResult r;
  r.deviation.assign(deviation.begin(), deviation.end());
  r.alpha.resize(clients);
  if (beta == 0.0) {
    // Pure multiplicative update, evaluated in the log domain so that large
    // lambda * d does not underflow every weight at once.
    std::vector<double> log_a(clients);
    for (std::size_t k = 0; k < clients; ++k) log_a[k] = std::log(alpha[k]) - lambda * deviation[k];
    const double mx = *std::max_element(log_a.begin(), log_a.end());
    for (std::size_t k = 0; k < clients; ++k) r.alpha[k] = std::exp(log_a[k] - mx);
  } else {
    for (std::size_t k = 0; k < clients; ++k) {
      const double decayed = alpha[k] * std::exp(-lambda * deviation[k]);
      r.alpha[k] = beta * alpha[k] + (1.0 - beta) * decayed;
    }
  }
  double z = 0.0;
  for (double a : r.alpha) z += a;
  for (double& a : r.alpha) {
    a = std::max(a / z, std::numeric_limits<double>::min());
  }
  z = 0.0;
  for (double a : r.alpha) z += a;
  r.weights.resize(clients);
  for (std::size_t k = 0; k < clients; ++k) r.weights[k] = r.alpha[k] / z;
  return r;
}

std::vector<double> sample_weights(std::span<const std::size_t> sample_counts) {
  double total = 0.0;
  for (auto n : sample_counts) total += static_cast<double>(n);
  if (!(total > 0.0)) throw ValidationError("sample counts must not all be zero");
  std::vector<double> w;
  w.reserve(sample_counts.size());
  for (auto n : sample_counts) w.push_back(static_cast<double>(n) / total);
  return w;
}

namespace {

ParameterVector weighted_sum(std::span<const ParameterVector> grads, std::span<const double> w) {
  ParameterVector out(grads.front().manifest());
  for (std::size_t k = 0; k < grads.size(); ++k) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * grads[k][i];
  }
  return out;
}

}  // namespace

std::pair<AggregationResult, AggregationState> aggregate_fedia(
    std::span<const ParameterVector> grads, std::span<const std::size_t> sample_counts,
    const AggregationState& state, bool stage2_enabled) {
  require_gradients(grads, "aggregate_fedia");
  if (sample_counts.size() != grads.size()) {
    throw ValidationError("aggregate_fedia: one sample count per client required");
  }
  const auto importance = global_importance(grads);
  AggregationResult result;
  result.mask = top_ratio_mask(importance, state.rho);

  std::vector<ParameterVector> masked;
  masked.reserve(grads.size());
  for (const auto& g : grads) masked.push_back(apply_mask(g, result.mask));

  AggregationState next = state;
  if (stage2_enabled) {
    if (state.alpha.size() != grads.size()) {
      throw ValidationError(fmt::format("aggregate_fedia: state holds {} weights for {} clients",
                                        state.alpha.size(), grads.size()));
    }
    auto irm = irm_update(masked, state.alpha, state.lambda, state.beta);
    result.weights = std::move(irm.weights);
    next.alpha = std::move(irm.alpha);
  } else {
    result.weights = sample_weights(sample_counts);
  }
  result.global_gradient = weighted_sum(masked, result.weights);
  result.drift = state.mask_prev ? mask_drift(*state.mask_prev, result.mask) : 0.0;
  next.mask_prev = result.mask;
  ++next.round;
  return {std::move(result), std::move(next)};
}

ParameterVector aggregate_fedavg(std::span<const ParameterVector> grads,
                                 std::span<const std::size_t> sample_counts) {
  require_gradients(grads, "aggregate_fedavg");
  if (sample_counts.size() != grads.size()) {
    throw ValidationError("aggregate_fedavg: one sample count per client required");
  }
  const auto w = sample_weights(sample_counts);
  return weighted_sum(grads, w);
}

ParameterVector apply_update(const ParameterVector& w, const ParameterVector& g, double lr) {
  require_same_layout(w, g, "apply_update");
  if (!(lr > 0.0)) throw ValidationError("apply_update: learning rate must be > 0");
  ParameterVector out = w;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * g[i];
  return out;
}

}  // namespace fedia
