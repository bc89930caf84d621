#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "fedia/graph.hpp"
#include "fedia/rng.hpp"

namespace fedia::test {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("fedia_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Erdos-Renyi graph with Gaussian features and uniform labels.
inline Graph random_graph(std::size_t n, std::size_t feat_dim, int classes, double edge_p,
                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (rng.uniform() < edge_p) edges.emplace_back(u, v);
    }
  }
  Matrix x(n, feat_dim);
  for (double& v : x.data()) v = rng.normal();
  std::vector<int> labels(n);
  for (auto& y : labels) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return build_graph(n, edges, std::move(x), std::move(labels), classes, std::vector<int>(n, 0));
}

/// Synthetic domains cut into `per_domain` clients each, ordered by domain.
inline std::vector<Graph> synthetic_clients(std::size_t domains, std::size_t nodes_per_domain,
                                            std::size_t feat_dim, int classes, double skew,
                                            std::size_t per_domain, std::uint64_t seed,
                                            const SyntheticOptions& options = {}) {
  std::vector<Graph> clients;
  const auto graphs =
      generate_synthetic_domains(domains, nodes_per_domain, feat_dim, classes, skew, seed, options);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    for (auto& c : partition_domain(graphs[i], per_domain, derive_seed(seed, 100 + i))) {
      clients.push_back(std::move(c));
    }
  }
  return clients;
}

}  // namespace fedia::test
