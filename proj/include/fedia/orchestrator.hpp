#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "fedia/aggregation.hpp"
#include "fedia/graph.hpp"
#include "fedia/model.hpp"
#include "fedia/params.hpp"
#include "fedia/trainer.hpp"

namespace fedia {

enum class Strategy { FedAvg, FedProx, FedIA, FedIAP };

/// Client-side rule wrapped by FedIA / FedIA-p.
enum class ClientRule { FedAvg, FedProx };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);
std::string_view to_string(ClientRule r);
ClientRule parse_client_rule(std::string_view name);

struct ExperimentConfig {
  std::vector<Graph> clients;  // client id = index; domain from Graph::domain_id
  ModelConfig model;
  LocalOptConfig local_opt;
  Strategy strategy = Strategy::FedAvg;
  ClientRule wrapped = ClientRule::FedAvg;
  std::size_t rounds = 200;
  std::optional<double> server_lr;  // defaults to local_opt.learning_rate
  double rho = 0.1;
  double lambda = 1.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::size_t summarize_last = 20;
  std::size_t threads = 1;

  double effective_server_lr() const { return server_lr.value_or(local_opt.learning_rate); }
  /// local_opt with prox_mu zeroed unless the client rule is FedProx.
  LocalOptConfig client_opt() const;
  bool uses_fedia() const { return strategy == Strategy::FedIA || strategy == Strategy::FedIAP; }
};

void validate(const ExperimentConfig& config);

struct RunState {
  ParameterVector weights;
  AggregationState aggregation;
  std::size_t round = 0;
};

RunState initial_state(const ExperimentConfig& config);

struct RoundMetrics {
  std::size_t round = 0;
  std::map<int, double> per_domain_test_accuracy;
  double avg_accuracy = 0.0;      // unweighted mean over domains
  double mean_val_loss = 0.0;     // Infer-mode loss, mean over clients
  double mean_train_loss = 0.0;   // clients' task loss at the broadcast weights
  double drift = 0.0;
  std::vector<double> weights;
  double global_grad_l2 = 0.0;
  std::size_t mask_support = 0;
};

struct RoundOutput {
  RunState state;
  RoundMetrics metrics;
  AggregationResult aggregation;  // mask is all ones for FedAvg / FedProx
};

/// One synchronous round: broadcast, local training, aggregation, server
/// step, then per-domain evaluation of the new weights.
RoundOutput run_round(const RunState& state, const ExperimentConfig& config);

using RoundObserver = std::function<void(const RoundOutput&)>;

std::vector<RoundMetrics> run_experiment(const ExperimentConfig& config,
                                         const RoundObserver& observer = {});

struct DomainSummary {
  int domain = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct Summary {
  std::vector<DomainSummary> domains;
  double avg = 0.0;         // mean of domain means
  double avg_stddev = 0.0;  // population std of the per-round AVG
  double worst_domain = 0.0;
};

Summary summarize(std::span<const RoundMetrics> metrics, std::size_t last_n);

}  // namespace fedia
