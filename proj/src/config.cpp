#include "fedia/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include <fmt/format.h>

#include "fedia/error.hpp"
#include "fedia/rng.hpp"

namespace fedia {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::string_view where,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ValidationError(fmt::format("{}: expected an object", where));
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(fmt::format("{}: unknown key '{}'", where, key));
    }
  }
}

std::string field_path(std::string_view where, std::string_view key) {
  return where.empty() ? std::string(key) : fmt::format("{}.{}", where, key);
}

double get_real(const json& obj, std::string_view where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) {
    throw ValidationError(fmt::format("{}: expected a number", field_path(where, key)));
  }
  return v.get<double>();
}

std::uint64_t get_count(const json& obj, std::string_view where, const char* key,
                        std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    throw ValidationError(
        fmt::format("{}: expected a nonnegative integer", field_path(where, key)));
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const json& obj, std::string_view where, const char* key,
                       std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) {
    throw ValidationError(fmt::format("{}: expected a string", field_path(where, key)));
  }
  return v.get<std::string>();
}

template <typename Parse>
auto with_field(std::string_view path, Parse&& parse) {
  try {
    return parse();
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path, e.what()));
  }
}

DataSource parse_data(const json& obj, const std::filesystem::path& base_dir) {
  reject_unknown(obj, "data", {"synthetic", "nodes", "edges", "partition_dir", "plan", "split_seed"});
  DataSource d;
  const int sources = (obj.contains("synthetic") ? 1 : 0) + (obj.contains("nodes") ? 1 : 0) +
                      (obj.contains("partition_dir") ? 1 : 0);
  if (sources != 1) {
    throw ValidationError("data: set exactly one of synthetic, nodes/edges, partition_dir");
  }
  if (obj.contains("synthetic")) {
    const auto& s = obj.at("synthetic");
    reject_unknown(s, "data.synthetic",
                   {"num_domains", "nodes_per_domain", "feat_dim", "num_classes", "skew_strength",
                    "seed", "class_separation", "intra_degree", "inter_degree"});
    DataSource::Synthetic syn;
    const std::string_view w = "data.synthetic";
    syn.num_domains = get_count(s, w, "num_domains", syn.num_domains);
    syn.nodes_per_domain = get_count(s, w, "nodes_per_domain", syn.nodes_per_domain);
    syn.feat_dim = get_count(s, w, "feat_dim", syn.feat_dim);
    syn.num_classes = static_cast<int>(get_count(s, w, "num_classes", 4));
    syn.skew_strength = get_real(s, w, "skew_strength", 0.0);
    syn.seed = get_count(s, w, "seed", 0);
    syn.options.class_separation = get_real(s, w, "class_separation", syn.options.class_separation);
    syn.options.intra_degree = get_real(s, w, "intra_degree", syn.options.intra_degree);
    syn.options.inter_degree = get_real(s, w, "inter_degree", syn.options.inter_degree);
    d.synthetic = syn;
  }
  if (obj.contains("nodes") != obj.contains("edges")) {
    throw ValidationError("data: nodes and edges must be given together");
  }
  if (obj.contains("nodes")) {
    d.nodes = base_dir / get_string(obj, "data", "nodes", "");
    d.edges = base_dir / get_string(obj, "data", "edges", "");
  }
  if (obj.contains("partition_dir")) {
    d.partition_dir = base_dir / get_string(obj, "data", "partition_dir", "");
    if (obj.contains("plan")) {
      throw ValidationError("data.plan: not allowed with partition_dir (already partitioned)");
    }
  }
  d.plan = get_string(obj, "data", "plan", "");
  d.split_seed = get_count(obj, "data", "split_seed", 0);
  return d;
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  reject_unknown(doc, "config",
                 {"data", "model", "local", "strategy", "wrap", "rounds", "server_lr", "rho",
                  "lambda", "beta", "seed", "summarize_last"});
  if (!doc.contains("data")) throw ValidationError("data: required");

  RunConfig rc;
  rc.raw = doc;
  rc.data = parse_data(doc.at("data"), base_dir);

  ExperimentConfig& e = rc.experiment;
  e.seed = get_count(doc, "", "seed", 0);
  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    reject_unknown(m, "model", {"backbone", "hidden_dim", "seed"});
    e.model.backbone = with_field("model.backbone", [&] {
      return parse_backbone(get_string(m, "model", "backbone", "pmlp_gcn"));
    });
    e.model.hidden_dim = get_count(m, "model", "hidden_dim", 128);
    e.model.seed = get_count(m, "model", "seed", e.seed);
  } else {
    e.model.seed = e.seed;
  }
  if (doc.contains("local")) {
    const auto& l = doc.at("local");
    reject_unknown(l, "local", {"lr", "momentum", "weight_decay", "local_iterations", "prox_mu"});
    e.local_opt.learning_rate = get_real(l, "local", "lr", e.local_opt.learning_rate);
    e.local_opt.momentum = get_real(l, "local", "momentum", e.local_opt.momentum);
    e.local_opt.weight_decay = get_real(l, "local", "weight_decay", e.local_opt.weight_decay);
    e.local_opt.local_iterations =
        get_count(l, "local", "local_iterations", e.local_opt.local_iterations);
    e.local_opt.prox_mu = get_real(l, "local", "prox_mu", e.local_opt.prox_mu);
  }
  e.strategy = with_field("strategy", [&] {
    return parse_strategy(get_string(doc, "", "strategy", "fedavg"));
  });
  e.wrapped = with_field("wrap", [&] {
    return parse_client_rule(get_string(doc, "", "wrap", "fedavg"));
  });
  if (doc.contains("wrap") && !e.uses_fedia()) {
    throw ValidationError("wrap: only meaningful for fedia / fedia_p");
  }
  e.rounds = get_count(doc, "", "rounds", 200);
  if (doc.contains("server_lr") && !doc.at("server_lr").is_null()) {
    e.server_lr = get_real(doc, "", "server_lr", 0.0);
  }
  e.rho = get_real(doc, "", "rho", e.rho);
  e.lambda = get_real(doc, "", "lambda", e.lambda);
  e.beta = get_real(doc, "", "beta", e.beta);
  e.summarize_last = get_count(doc, "", "summarize_last", 20);

  // Field-level checks that do not need the data.
  with_field("model", [&] {
    if (e.model.hidden_dim == 0) throw ValidationError("hidden_dim must be > 0");
    return 0;
  });
  with_field("local", [&] {
    validate(e.local_opt);
    return 0;
  });
  if (!(e.rho > 0.0 && e.rho <= 1.0)) throw ValidationError("rho: must be in (0, 1]");
  if (!(e.lambda >= 0.0)) throw ValidationError("lambda: must be >= 0");
  if (!(e.beta >= 0.0 && e.beta < 1.0)) throw ValidationError("beta: must be in [0, 1)");
  if (e.summarize_last > e.rounds) {
    throw ValidationError("summarize_last: must not exceed rounds");
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
  return parse_run_config(doc, path.parent_path());
}

namespace {

std::vector<Graph> one_client_per_domain(const Graph& g, std::uint64_t seed) {
  auto domains = split_by_domain(g);
  for (std::size_t d = 0; d < domains.size(); ++d) {
    domains[d] = split_nodes(std::move(domains[d]), SplitRatios{}, derive_seed(seed, d));
  }
  return domains;
}

}  // namespace

std::vector<Graph> load_partition_dir(const std::filesystem::path& dir, std::uint64_t split_seed) {
  std::ifstream in(dir / "partition.json");
  if (!in) throw ValidationError(fmt::format("{}: missing partition.json", dir.string()));
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}/partition.json: {}", dir.string(), e.what()));
  }
  std::vector<Graph> clients;
  int classes = 0;
  for (const auto& entry : manifest.at("clients")) {
    const auto sub = dir / entry.at("dir").get<std::string>();
    clients.push_back(load_domain(sub / "nodes.csv", sub / "edges.csv"));
    classes = std::max(classes, clients.back().num_classes);
  }
  for (std::size_t k = 0; k < clients.size(); ++k) {
    clients[k].num_classes = classes;
    if (clients[k].node_count >= 3) {
      clients[k] = split_nodes(std::move(clients[k]), SplitRatios{}, derive_seed(split_seed, k));
    }
  }
  return clients;
}

ExperimentConfig materialize(const RunConfig& config) {
  ExperimentConfig e = config.experiment;
  const DataSource& d = config.data;
  if (d.synthetic) {
    const auto& s = *d.synthetic;
    const auto domains = generate_synthetic_domains(s.num_domains, s.nodes_per_domain, s.feat_dim,
                                                    s.num_classes, s.skew_strength, s.seed,
                                                    s.options);
    if (d.plan.empty()) {
      for (std::size_t i = 0; i < domains.size(); ++i) {
        e.clients.push_back(split_nodes(domains[i], SplitRatios{}, derive_seed(d.split_seed, i)));
      }
    } else {
      const PartitionPlan plan = parse_plan(d.plan, d.split_seed);
      if (plan.domain_ratios.size() != domains.size()) {
        throw ValidationError(fmt::format("data.plan: {} ratios for {} domains",
                                          plan.domain_ratios.size(), domains.size()));
      }
      for (std::size_t i = 0; i < domains.size(); ++i) {
        const std::size_t k = static_cast<std::size_t>(plan.domain_ratios[i]) * plan.clients_per_unit;
        for (auto& c : partition_domain(domains[i], k, derive_seed(plan.seed, i))) {
          e.clients.push_back(std::move(c));
        }
      }
    }
  } else if (d.nodes) {
    const Graph g = load_domain(*d.nodes, *d.edges);
    e.clients = d.plan.empty() ? one_client_per_domain(g, d.split_seed)
                               : partition_by_plan(g, parse_plan(d.plan, d.split_seed));
  } else {
    e.clients = load_partition_dir(*d.partition_dir, d.split_seed);
  }
  if (e.clients.empty()) throw ValidationError("data: produced no clients");
  e.model.feat_dim = e.clients.front().feat_dim();
  e.model.num_classes = e.clients.front().num_classes;
  for (const auto& c : e.clients) e.model.num_classes = std::max(e.model.num_classes, c.num_classes);
  for (auto& c : e.clients) c.num_classes = e.model.num_classes;
  validate(e);
  return e;
}

}  // namespace fedia
