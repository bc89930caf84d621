#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedia/tensor.hpp"

namespace fedia {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

/// One client's (or one domain's) node-classification graph.
///
/// Adjacency is CSR and stored symmetrically; column indices in each row are
/// strictly increasing. Every node belongs to exactly one split.
struct Graph {
  std::size_t node_count = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  Matrix features;  // [node_count x feat_dim]
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<Split> split;     // per node
  std::vector<int> node_domain; // per node domain tag
  int domain_id = -1;           // common domain tag, -1 when mixed
  std::vector<std::size_t> source_ids;  // id of each node in the graph it was cut from

  std::size_t feat_dim() const noexcept { return features.cols(); }
  std::size_t edge_count() const noexcept { return col_indices.size(); }
  std::span<const std::size_t> neighbors(std::size_t v) const {
    return {col_indices.data() + row_offsets[v], row_offsets[v + 1] - row_offsets[v]};
  }
  std::size_t degree(std::size_t v) const { return row_offsets[v + 1] - row_offsets[v]; }
  bool has_edge(std::size_t u, std::size_t v) const;

  std::vector<std::size_t> nodes_in(Split s) const;
  std::size_t count_in(Split s) const;
};

/// Builds a graph from an undirected edge list. Edges are symmetrized and
/// deduplicated; self-loops are kept once. All nodes start in the train split.
Graph build_graph(std::size_t node_count, std::span<const std::pair<std::size_t, std::size_t>> edges,
                  Matrix features, std::vector<int> labels, int num_classes,
                  std::vector<int> node_domain);

/// Throws ValidationError if any structural invariant fails.
void validate(const Graph& g);

/// Reads `id,f0..f{d-1},label,domain` and `src,dst` CSV files. With
/// num_classes <= 0 the class count is max label + 1.
Graph load_domain(const std::filesystem::path& nodes_path,
                  const std::filesystem::path& edges_path, int num_classes = 0);

/// Writes the two CSV files `load_domain` reads. Splits are not persisted.
void save_domain(const Graph& g, const std::filesystem::path& nodes_path,
                 const std::filesystem::path& edges_path);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Seeded shuffle into train/val/test. Val and test receive floor(r * n)
/// nodes each and train takes the remainder.
Graph split_nodes(Graph graph, SplitRatios ratios, std::uint64_t seed);

/// Subgraph on `nodes` (kept in the given order); edges with an endpoint
/// outside the set are dropped.
Graph induced_subgraph(const Graph& g, std::span<const std::size_t> nodes);

/// Random near-equal k-way node partition into induced subgraphs, each split
/// 60/20/20 with its own derived seed. Groups of fewer than three nodes are
/// kept entirely in train.
std::vector<Graph> partition_domain(const Graph& g, std::size_t k, std::uint64_t seed);

/// One induced subgraph per distinct domain tag, in ascending tag order.
std::vector<Graph> split_by_domain(const Graph& g);

struct PartitionPlan {
  std::vector<int> domain_ratios;  // one entry per domain, ascending domain tag
  std::size_t clients_per_unit = 1;
  std::uint64_t seed = 0;

  std::size_t total_clients() const;
};

/// Parses "1:10:1:1:1:1" or "1:10:1:1:1:1@2" (ratios, then clients per unit).
PartitionPlan parse_plan(const std::string& text, std::uint64_t seed);

/// Splits `g` by domain, then cuts domain i into ratio_i * clients_per_unit
/// clients. Clients are ordered by domain, then by group index.
std::vector<Graph> partition_by_plan(const Graph& g, const PartitionPlan& plan);

struct SyntheticOptions {
  double class_separation = 1.5;  // norm of each class mean
  double intra_degree = 6.0;      // expected same-class neighbours per node
  double inter_degree = 1.5;      // expected other-class neighbours per node
};

/// Stochastic-block-model domains sharing class means and a uniform label
/// prior; each domain adds its own feature offset of norm `skew_strength`.
std::vector<Graph> generate_synthetic_domains(std::size_t num_domains,
                                              std::size_t nodes_per_domain,
                                              std::size_t feat_dim, int num_classes,
                                              double skew_strength, std::uint64_t seed,
                                              const SyntheticOptions& options = {});

}  // namespace fedia
