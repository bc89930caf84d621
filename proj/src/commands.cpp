#include "fedia/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "fedia/config.hpp"
#include "fedia/error.hpp"
#include "fedia/graph.hpp"
#include "fedia/orchestrator.hpp"
#include "fedia/version.hpp"

namespace fedia::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

std::string exact(double x) { return fmt::format("{:.17g}", x); }

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << doc.dump(2) << '\n';
}

std::optional<json> read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    out.push_back(field);
  }
  return out;
}

// domain label -> mean, read from a summary.csv written by `run`.
std::map<std::string, double> read_baseline(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open baseline {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(fmt::format("{}: empty file", path.string()));
  const auto header = split_csv_line(line);
  const auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ValidationError(fmt::format("{}: missing column '{}'", path.string(), name));
  };
  const std::size_t domain_col = col("domain");
  const std::size_t mean_col = col("mean");
  std::map<std::string, double> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() <= std::max(domain_col, mean_col)) {
      throw ParseError(fmt::format("{}:{}: too few fields", path.string(), line_no), line_no);
    }
    try {
      out[fields[domain_col]] = std::stod(fields[mean_col]);
    } catch (const std::exception&) {
      throw ParseError(fmt::format("{}:{}: bad mean value", path.string(), line_no), line_no);
    }
  }
  return out;
}

std::string domain_label(int d) { return fmt::format("d{}", d); }

void write_summary(const fs::path& path, const Summary& s,
                   const std::optional<std::map<std::string, double>>& baseline) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << "domain,mean,std,mean_pct,std_pct";
  if (baseline) out << ",baseline_mean_pct,delta_pct";
  out << '\n';
  const auto row = [&](const std::string& label, double mean, double sd) {
    out << fmt::format("{},{},{},{:.2f},{:.2f}", label, exact(mean), exact(sd), 100.0 * mean,
                       100.0 * sd);
    if (baseline) {
      const auto it = baseline->find(label);
      if (it == baseline->end()) {
        out << ",,";
      } else {
        out << fmt::format(",{:.2f},{:.2f}", 100.0 * it->second, 100.0 * (mean - it->second));
      }
    }
    out << '\n';
  };
  for (const auto& d : s.domains) row(domain_label(d.domain), d.mean, d.stddev);
  row("AVG", s.avg, s.avg_stddev);
}

struct RunOutcome {
  int code = kExitOk;
  std::optional<Summary> summary;
  std::string error;
};

RunOutcome execute_run(const json& doc, const fs::path& base_dir, const fs::path& out_dir,
                       const std::optional<fs::path>& baseline_path, std::ostream& log,
                       std::size_t threads) {
  RunOutcome outcome;
  ExperimentConfig config;
  std::optional<std::map<std::string, double>> baseline;
  try {
    const RunConfig rc = parse_run_config(doc, base_dir);
    config = materialize(rc);
    config.threads = std::max<std::size_t>(1, threads);
    if (baseline_path) baseline = read_baseline(*baseline_path);
  } catch (const ValidationError& e) {
    outcome.code = kExitValidation;
    outcome.error = e.what();
    log << "error: " << e.what() << '\n';
    return outcome;
  } catch (const ParseError& e) {
    outcome.code = kExitValidation;
    outcome.error = e.what();
    log << "error: " << e.what() << '\n';
    return outcome;
  }

  fs::create_directories(out_dir);
  json manifest = {
      {"status", "running"},
      {"version", kSourceVersion},
      {"seed", config.seed},
      {"started_at", utc_now()},
      {"config", doc},
      {"resolved",
       {{"clients", config.clients.size()},
        {"feat_dim", config.model.feat_dim},
        {"num_classes", config.model.num_classes},
        {"server_lr", config.effective_server_lr()}}},
      {"outputs",
       {{"metrics", (out_dir / "metrics.csv").string()},
        {"summary", (out_dir / "summary.csv").string()}}},
  };
  write_json(out_dir / "manifest.json", manifest);

  std::set<int> domain_set;
  for (const auto& c : config.clients) domain_set.insert(c.domain_id);
  std::ofstream metrics_out(out_dir / "metrics.csv");
  metrics_out << "round";
  for (int d : domain_set) metrics_out << ",acc_" << domain_label(d);
  metrics_out << ",avg_acc,val_loss,train_loss,drift,grad_l2\n";

  std::vector<RoundMetrics> metrics;
  try {
    metrics = run_experiment(config, [&](const RoundOutput& r) {
      const auto& m = r.metrics;
      std::string line = fmt::format("{}", m.round);
      for (int d : domain_set) {
        const auto it = m.per_domain_test_accuracy.find(d);
        line += it == m.per_domain_test_accuracy.end() ? "," : "," + exact(it->second);
      }
      line += fmt::format(",{},{},{},{},{}\n", exact(m.avg_accuracy), exact(m.mean_val_loss),
                          exact(m.mean_train_loss), exact(m.drift), exact(m.global_grad_l2));
      metrics_out << line;
      metrics_out.flush();
    });
  } catch (const ValidationError& e) {
    outcome.code = kExitValidation;
    outcome.error = e.what();
  } catch (const std::exception& e) {
    outcome.code = kExitRuntime;
    outcome.error = e.what();
  }
  metrics_out.close();

  manifest["finished_at"] = utc_now();
  if (outcome.code != kExitOk) {
    log << "error: " << outcome.error << '\n';
    manifest["status"] = "failed";
    manifest["error"] = outcome.error;
    write_json(out_dir / "manifest.json", manifest);
    return outcome;
  }
  manifest["rounds_completed"] = metrics.size();
  if (config.summarize_last > 0 && !metrics.empty()) {
    const Summary s = summarize(metrics, config.summarize_last);
    write_summary(out_dir / "summary.csv", s, baseline);
    manifest["summary"] = {{"avg", s.avg}, {"avg_std", s.avg_stddev},
                           {"worst_domain", s.worst_domain}};
    if (baseline_path) manifest["outputs"]["baseline"] = baseline_path->string();
    outcome.summary = s;
    log << fmt::format("AVG accuracy over last {} rounds: {:.2f}% (std {:.2f})\n",
                       config.summarize_last, 100.0 * s.avg, 100.0 * s.avg_stddev);
  } else {
    std::ofstream(out_dir / "summary.csv") << "domain,mean,std,mean_pct,std_pct\n";
  }
  manifest["status"] = "completed";
  write_json(out_dir / "manifest.json", manifest);
  return outcome;
}

std::optional<json> read_config_json(const fs::path& path, std::ostream& log) {
  std::ifstream in(path);
  if (!in) {
    log << "error: cannot open config " << path.string() << '\n';
    return std::nullopt;
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    log << "error: " << path.string() << ": invalid JSON: " << e.what() << '\n';
    return std::nullopt;
  }
}

}  // namespace

int cmd_run(const fs::path& config_path, const fs::path& out_dir,
            const std::optional<fs::path>& baseline, std::ostream& log, std::size_t threads) {
  const auto doc = read_config_json(config_path, log);
  if (!doc) return kExitValidation;
  try {
    return execute_run(*doc, config_path.parent_path(), out_dir, baseline, log, threads).code;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

std::vector<double> default_grid() { return {0.1, 0.3, 0.5, 0.7, 0.9}; }

int cmd_sweep(const fs::path& config_path, const std::vector<double>& rhos,
              const std::vector<double>& betas, const fs::path& out_dir, std::ostream& log,
              std::size_t threads) {
  auto doc = read_config_json(config_path, log);
  if (!doc) return kExitValidation;
  try {
    const RunConfig base = parse_run_config(*doc, config_path.parent_path());
    if (!base.experiment.uses_fedia()) {
      throw ValidationError("strategy: sweeps need fedia or fedia_p");
    }
    if (rhos.empty() || betas.empty()) throw ValidationError("sweep grid is empty");
  } catch (const ValidationError& e) {
    log << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  struct Cell {
    double rho;
    double beta;
    std::optional<double> avg;
    std::string status;
  };
  std::vector<Cell> cells;
  bool any_failed = false;
  try {
    fs::create_directories(out_dir);
    for (double rho : rhos) {
      for (double beta : betas) {
        Cell cell{rho, beta, std::nullopt, "completed"};
        const fs::path dir = out_dir / fmt::format("rho_{}_beta_{}", rho, beta);
        const auto existing = read_json(dir / "manifest.json");
        if (existing && existing->value("status", "") == "completed" &&
            existing->contains("summary")) {
          cell.avg = existing->at("summary").at("avg").get<double>();
          log << fmt::format("rho={} beta={}: already completed, skipping\n", rho, beta);
        } else {
          json cell_doc = *doc;
          cell_doc["rho"] = rho;
          cell_doc["beta"] = beta;
          log << fmt::format("rho={} beta={}: running\n", rho, beta);
          const auto outcome =
              execute_run(cell_doc, config_path.parent_path(), dir, std::nullopt, log, threads);
          if (outcome.code != kExitOk) {
            cell.status = "failed";
            any_failed = true;
          } else if (outcome.summary) {
            cell.avg = outcome.summary->avg;
          }
        }
        cells.push_back(cell);
      }
    }

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].avg && (!best || *cells[i].avg > *cells[*best].avg)) best = i;
    }
    std::ofstream out(out_dir / "sweep.csv");
    out << "rho,beta,avg_accuracy,status,is_best\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      out << fmt::format("{},{},{},{},{}\n", c.rho, c.beta, c.avg ? exact(*c.avg) : "", c.status,
                         best && *best == i ? 1 : 0);
    }
    if (best) {
      log << fmt::format("best cell: rho={} beta={} AVG={:.2f}%\n", cells[*best].rho,
                         cells[*best].beta, 100.0 * *cells[*best].avg);
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return any_failed ? kExitRuntime : kExitOk;
}

int cmd_partition(const fs::path& nodes, const fs::path& edges, const std::string& plan_text,
                  std::uint64_t seed, const fs::path& out_dir, std::ostream& log) {
  std::vector<Graph> clients;
  PartitionPlan plan;
  try {
    const Graph g = load_domain(nodes, edges);
    plan = parse_plan(plan_text, seed);
    clients = partition_by_plan(g, plan);
  } catch (const ParseError& e) {
    log << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    log << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    fs::create_directories(out_dir);
    json manifest = {
        {"version", kSourceVersion},
        {"plan", plan_text},
        {"seed", seed},
        {"source", {{"nodes", nodes.string()}, {"edges", edges.string()}}},
        {"clients", json::array()},
    };
    for (std::size_t k = 0; k < clients.size(); ++k) {
      const std::string name = fmt::format("client_{:03}", k);
      fs::create_directories(out_dir / name);
      save_domain(clients[k], out_dir / name / "nodes.csv", out_dir / name / "edges.csv");
      manifest["clients"].push_back({{"dir", name},
                                     {"domain", clients[k].domain_id},
                                     {"node_count", clients[k].node_count},
                                     {"source_ids", clients[k].source_ids}});
    }
    write_json(out_dir / "partition.json", manifest);
    log << fmt::format("wrote {} clients to {}\n", clients.size(), out_dir.string());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace fedia::cli
