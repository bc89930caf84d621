#pragma once

// Reference implementations used only by tests. They follow the written
// procedures step by step and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

namespace fedia::oracle {

/// Sort indices by (value descending, index ascending) and keep the first k.
inline std::vector<std::uint8_t> sorted_top_k(const std::vector<double>& v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  std::vector<std::uint8_t> mask(v.size(), 0);
  for (std::size_t i = 0; i < k; ++i) mask[idx[i]] = 1;
  return mask;
}

struct StraightLineResult {
  std::vector<double> global_gradient;
  std::vector<std::uint8_t> mask;
  std::vector<double> weights;
  std::vector<double> alpha;  // unnormalised alpha^{t+1}
};

/// Importance, mask, unweighted masked mean, deviations, multiplicative
/// weights, normalisation and the weighted masked sum, written straight
/// through with plain loops.
inline StraightLineResult straight_line_fedia(const std::vector<std::vector<double>>& grads,
                                              const std::vector<double>& alpha, double rho,
                                              double lambda) {
  const std::size_t clients = grads.size();
  const std::size_t d = grads[0].size();
  std::vector<double> importance(d, 0.0);
  for (std::size_t k = 0; k < clients; ++k) {
    for (std::size_t i = 0; i < d; ++i) importance[i] += std::fabs(grads[k][i]);
  }
  for (std::size_t i = 0; i < d; ++i) importance[i] = importance[i] / static_cast<double>(clients);

  const auto k_keep = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(d) - 1e-9));
  StraightLineResult r;
  r.mask = sorted_top_k(importance, k_keep);

  std::vector<std::vector<double>> masked(clients, std::vector<double>(d));
  for (std::size_t k = 0; k < clients; ++k) {
    for (std::size_t i = 0; i < d; ++i) masked[k][i] = grads[k][i] * r.mask[i];
  }
  std::vector<double> mean(d, 0.0);
  for (std::size_t k = 0; k < clients; ++k) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += masked[k][i];
  }
  for (std::size_t i = 0; i < d; ++i) mean[i] /= static_cast<double>(clients);

  double z = 0.0;
  r.alpha.resize(clients);
  for (std::size_t k = 0; k < clients; ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) sq += (masked[k][i] - mean[i]) * (masked[k][i] - mean[i]);
    r.alpha[k] = alpha[k] * std::exp(-lambda * std::sqrt(sq));
    z += r.alpha[k];
  }
  r.global_gradient.assign(d, 0.0);
  r.weights.resize(clients);
  for (std::size_t k = 0; k < clients; ++k) {
    r.weights[k] = r.alpha[k] / z;
    for (std::size_t i = 0; i < d; ++i) r.global_gradient[i] += r.weights[k] * masked[k][i];
  }
  return r;
}

}  // namespace fedia::oracle
