#include "fedia/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "fedia/error.hpp"
#include "fedia/rng.hpp"

namespace fedia {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::FedAvg:
      return "fedavg";
    case Strategy::FedProx:
      return "fedprox";
    case Strategy::FedIA:
      return "fedia";
    case Strategy::FedIAP:
      return "fedia_p";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::FedAvg, Strategy::FedProx, Strategy::FedIA, Strategy::FedIAP}) {
    if (name == to_string(s)) return s;
  }
  throw ValidationError(fmt::format(
      "unknown strategy '{}' (expected fedavg, fedprox, fedia or fedia_p)", std::string(name)));
}

std::string_view to_string(ClientRule r) { return r == ClientRule::FedAvg ? "fedavg" : "fedprox"; }

ClientRule parse_client_rule(std::string_view name) {
  if (name == "fedavg") return ClientRule::FedAvg;
  if (name == "fedprox") return ClientRule::FedProx;
  throw ValidationError(
      fmt::format("unknown client rule '{}' (expected fedavg or fedprox)", std::string(name)));
}

LocalOptConfig ExperimentConfig::client_opt() const {
  LocalOptConfig opt = local_opt;
  const bool prox = strategy == Strategy::FedProx || (uses_fedia() && wrapped == ClientRule::FedProx);
  if (!prox) opt.prox_mu = 0.0;
  return opt;
}

void validate(const ExperimentConfig& config) {
  if (config.clients.empty()) throw ValidationError("experiment needs at least one client");
  validate(config.model);
  validate(config.local_opt);
  const bool prox = config.strategy == Strategy::FedProx ||
                    (config.uses_fedia() && config.wrapped == ClientRule::FedProx);
  if (prox && !(config.local_opt.prox_mu > 0.0)) {
    throw ValidationError("FedProx clients need local.prox_mu > 0");
  }
  if (config.summarize_last > config.rounds) {
    throw ValidationError(fmt::format("summarize_last ({}) exceeds rounds ({})",
                                      config.summarize_last, config.rounds));
  }
  if (config.server_lr && !(*config.server_lr > 0.0)) {
    throw ValidationError("server_lr must be > 0");
  }
  if (!(config.rho > 0.0 && config.rho <= 1.0)) throw ValidationError("rho must be in (0, 1]");
  if (!(config.lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(config.beta >= 0.0 && config.beta < 1.0)) throw ValidationError("beta must be in [0, 1)");
  if (config.threads == 0) throw ValidationError("threads must be >= 1");
  for (std::size_t k = 0; k < config.clients.size(); ++k) {
    const auto& g = config.clients[k];
    try {
      validate(g);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("client {}: {}", k, e.what()));
    }
    if (g.feat_dim() != config.model.feat_dim) {
      throw ValidationError(fmt::format("client {} has {} features, model expects {}", k,
                                        g.feat_dim(), config.model.feat_dim));
    }
    if (g.num_classes != config.model.num_classes) {
      throw ValidationError(fmt::format("client {} has {} classes, model expects {}", k,
                                        g.num_classes, config.model.num_classes));
    }
    if (g.count_in(Split::Train) == 0) {
      throw ValidationError(fmt::format("client {} has no training nodes", k));
    }
  }
}

RunState initial_state(const ExperimentConfig& config) {
  RunState s;
  s.weights = init_params(config.model);
  s.aggregation =
      AggregationState::initial(config.clients.size(), config.rho, config.lambda, config.beta);
  return s;
}

namespace {

// Runs fn(k) for k in [0, n) on up to `threads` workers. Results are written
// by index, so the outcome does not depend on scheduling. The lowest-index
// failure is rethrown.
template <typename Fn>
void for_each_client(std::size_t n, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto body = [&](std::size_t k) {
    try {
      fn(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(threads, n);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < n; k = next++) body(k);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct ClientEval {
  std::optional<double> test_accuracy;
  std::optional<double> val_loss;
};

}  // namespace

RoundOutput run_round(const RunState& state, const ExperimentConfig& config) {
  const std::size_t n = config.clients.size();
  const LocalOptConfig opt = config.client_opt();

  std::vector<ClientUpdate> updates(n);
  for_each_client(n, config.threads, [&](std::size_t k) {
    try {
      updates[k] = local_train(state.weights, config.clients[k], config.model, opt,
                               derive_seed(derive_seed(config.seed, state.round), k), k);
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("round {}: {}", state.round, e.what()));
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("round {}, client {}: {}", state.round, k, e.what()));
    }
  });

  std::vector<ParameterVector> grads;
  std::vector<std::size_t> counts;
  grads.reserve(n);
  for (auto& u : updates) {
    grads.push_back(std::move(u.gradient));
    counts.push_back(u.sample_count);
  }

  RoundOutput out;
  out.state = state;
  if (config.uses_fedia()) {
    auto [result, next] =
        aggregate_fedia(grads, counts, state.aggregation, config.strategy == Strategy::FedIA);
    out.aggregation = std::move(result);
    out.state.aggregation = std::move(next);
  } else {
    out.aggregation.global_gradient = aggregate_fedavg(grads, counts);
    out.aggregation.mask.assign(out.aggregation.global_gradient.size(), 1);
    out.aggregation.weights = sample_weights(counts);
    out.aggregation.drift = 0.0;
    ++out.state.aggregation.round;
  }
  for (double x : out.aggregation.global_gradient.values()) {
    if (!std::isfinite(x)) {
      throw NumericalError(fmt::format("round {}: aggregated gradient is not finite", state.round));
    }
  }
  out.state.weights =
      apply_update(state.weights, out.aggregation.global_gradient, config.effective_server_lr());
  out.state.round = state.round + 1;

  std::vector<ClientEval> evals(n);
  for_each_client(n, config.threads, [&](std::size_t k) {
    const Graph& g = config.clients[k];
    if (g.count_in(Split::Test) > 0) {
      evals[k].test_accuracy = accuracy(out.state.weights, g, config.model, Split::Test);
    }
    if (g.count_in(Split::Val) > 0) {
      evals[k].val_loss = mean_loss(out.state.weights, g, config.model, Split::Val, Mode::Infer);
    }
  });

  RoundMetrics& m = out.metrics;
  m.round = state.round;
  std::map<int, std::pair<double, std::size_t>> per_domain;
  double val_total = 0.0;
  std::size_t val_clients = 0;
  double train_total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (evals[k].test_accuracy) {
      auto& [sum, count] = per_domain[config.clients[k].domain_id];
      sum += *evals[k].test_accuracy;
      ++count;
    }
    if (evals[k].val_loss) {
      val_total += *evals[k].val_loss;
      ++val_clients;
    }
    train_total += updates[k].local_loss;
  }
  double avg = 0.0;
  for (const auto& [domain, acc] : per_domain) {
    const double mean = acc.first / static_cast<double>(acc.second);
    m.per_domain_test_accuracy[domain] = mean;
    avg += mean;
  }
  m.avg_accuracy = per_domain.empty() ? 0.0 : avg / static_cast<double>(per_domain.size());
  m.mean_val_loss = val_clients == 0 ? 0.0 : val_total / static_cast<double>(val_clients);
  m.mean_train_loss = train_total / static_cast<double>(n);
  m.drift = out.aggregation.drift;
  m.weights = out.aggregation.weights;
  m.global_grad_l2 = l2_norm(out.aggregation.global_gradient.values());
  m.mask_support = popcount(out.aggregation.mask);
  return out;
}

std::vector<RoundMetrics> run_experiment(const ExperimentConfig& config,
                                         const RoundObserver& observer) {
  validate(config);
  std::vector<RoundMetrics> metrics;
  metrics.reserve(config.rounds);
  RunState state = initial_state(config);
  for (std::size_t t = 0; t < config.rounds; ++t) {
    RoundOutput out = run_round(state, config);
    if (observer) observer(out);
    metrics.push_back(std::move(out.metrics));
    state = std::move(out.state);
  }
  return metrics;
}

Summary summarize(std::span<const RoundMetrics> metrics, std::size_t last_n) {
  if (last_n == 0 || last_n > metrics.size()) {
    throw ValidationError(fmt::format("cannot summarise the last {} of {} rounds", last_n,
                                      metrics.size()));
  }
  const auto tail = metrics.subspan(metrics.size() - last_n);
  const auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(var / static_cast<double>(xs.size()))};
  };

  std::map<int, std::vector<double>> series;
  std::vector<double> avg_series;
  for (const auto& m : tail) {
    for (const auto& [domain, acc] : m.per_domain_test_accuracy) series[domain].push_back(acc);
    avg_series.push_back(m.avg_accuracy);
  }
  Summary s;
  for (const auto& [domain, xs] : series) {
    const auto [mean, sd] = mean_std(xs);
    s.domains.push_back({domain, mean, sd});
  }
  if (!s.domains.empty()) {
    double total = 0.0;
    s.worst_domain = s.domains.front().mean;
    for (const auto& d : s.domains) {
      total += d.mean;
      s.worst_domain = std::min(s.worst_domain, d.mean);
    }
    s.avg = total / static_cast<double>(s.domains.size());
  }
  s.avg_stddev = mean_std(avg_series).second;
  return s;
}

}  // namespace fedia
