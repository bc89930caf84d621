#include "fedia/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

#include "fedia/error.hpp"
#include "fedia/rng.hpp"

namespace fedia {

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::size_t> Graph::nodes_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < node_count; ++v) {
    if (split[v] == s) out.push_back(v);
  }
  return out;
}

std::size_t Graph::count_in(Split s) const {
  return static_cast<std::size_t>(std::count(split.begin(), split.end(), s));
}

Graph build_graph(std::size_t node_count,
                  std::span<const std::pair<std::size_t, std::size_t>> edges,
                  Matrix features, std::vector<int> labels, int num_classes,
                  std::vector<int> node_domain) {
  if (features.rows() != node_count || labels.size() != node_count ||
      node_domain.size() != node_count) {
    throw ValidationError("build_graph: per-node arrays do not match node_count");
  }
  std::vector<std::vector<std::size_t>> adj(node_count);
  for (const auto& [u, v] : edges) {
    if (u >= node_count || v >= node_count) {
      throw ValidationError(
          fmt::format("edge ({}, {}) references a node outside [0, {})", u, v, node_count));
    }
    adj[u].push_back(v);
    if (u != v) adj[v].push_back(u);
  }
  Graph g;
  g.node_count = node_count;
  g.row_offsets.assign(1, 0);
  g.row_offsets.reserve(node_count + 1);
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    g.col_indices.insert(g.col_indices.end(), nb.begin(), nb.end());
    g.row_offsets.push_back(g.col_indices.size());
  }
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.num_classes = num_classes;
  g.split.assign(node_count, Split::Train);
  g.node_domain = std::move(node_domain);
  if (!g.node_domain.empty() &&
      std::all_of(g.node_domain.begin(), g.node_domain.end(),
                  [&](int d) { return d == g.node_domain.front(); })) {
    g.domain_id = g.node_domain.front();
  }
  g.source_ids.resize(node_count);
  std::iota(g.source_ids.begin(), g.source_ids.end(), std::size_t{0});
  validate(g);
  return g;
}

void validate(const Graph& g) {
  const std::size_t n = g.node_count;
  if (g.row_offsets.size() != n + 1 || g.row_offsets.front() != 0 ||
      g.row_offsets.back() != g.col_indices.size()) {
    throw ValidationError("CSR row offsets are inconsistent with node/edge counts");
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (g.row_offsets[v] > g.row_offsets[v + 1]) {
      throw ValidationError("CSR row offsets must be nondecreasing");
    }
    const auto nb = g.neighbors(v);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (nb[i] >= n) throw ValidationError(fmt::format("node {} has out-of-range neighbour", v));
      if (i > 0 && nb[i] <= nb[i - 1]) {
        throw ValidationError(fmt::format("neighbours of node {} are not strictly increasing", v));
      }
      if (!g.has_edge(nb[i], v)) {
        throw ValidationError(fmt::format("edge ({}, {}) has no reverse edge", v, nb[i]));
      }
    }
  }
  if (g.features.rows() != n || g.labels.size() != n || g.split.size() != n ||
      g.node_domain.size() != n || g.source_ids.size() != n) {
    throw ValidationError("per-node arrays do not match node_count");
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (g.labels[v] < 0 || g.labels[v] >= g.num_classes) {
      throw ValidationError(
          fmt::format("node {} has label {} outside [0, {})", v, g.labels[v], g.num_classes));
    }
  }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                    : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, const std::filesystem::path& path, std::size_t line) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end || field.empty()) {
    throw ParseError(fmt::format("{}:{}: cannot parse '{}' as a number", path.string(), line,
                                 std::string(field)),
                     line);
  }
  return value;
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace

Graph load_domain(const std::filesystem::path& nodes_path,
                  const std::filesystem::path& edges_path, int num_classes) {
  std::ifstream nodes_in(nodes_path);
  if (!nodes_in) throw ParseError(fmt::format("cannot open {}", nodes_path.string()), 0);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(nodes_in, line)) {
    throw ParseError(fmt::format("{}: missing header", nodes_path.string()), 1);
  }
  ++line_no;
  const auto header = split_fields(line);
  if (header.size() < 3 || header.front() != "id" || header[header.size() - 2] != "label" ||
      header.back() != "domain") {
    throw ParseError(fmt::format("{}:1: expected header id,f0,...,label,domain",
                                 nodes_path.string()),
                     1);
  }
  const std::size_t feat_dim = header.size() - 3;

  struct Row {
    std::size_t id;
    std::vector<double> x;
    int label;
    int domain;
  };
  std::vector<Row> rows;
  while (std::getline(nodes_in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(fmt::format("{}:{}: expected {} fields, found {}", nodes_path.string(),
                                   line_no, header.size(), fields.size()),
                       line_no);
    }
    Row r;
    r.id = parse_number<std::size_t>(fields[0], nodes_path, line_no);
    r.x.reserve(feat_dim);
    for (std::size_t j = 0; j < feat_dim; ++j) {
      r.x.push_back(parse_number<double>(fields[1 + j], nodes_path, line_no));
    }
    r.label = parse_number<int>(fields[feat_dim + 1], nodes_path, line_no);
    r.domain = parse_number<int>(fields[feat_dim + 2], nodes_path, line_no);
    rows.push_back(std::move(r));
  }

  const std::size_t n = rows.size();
  Matrix features(n, feat_dim);
  std::vector<int> labels(n);
  std::vector<int> domains(n);
  std::vector<bool> seen(n, false);
  int max_label = -1;
  for (const auto& r : rows) {
    if (r.id >= n || seen[r.id]) {
      throw ValidationError(fmt::format("{}: node ids must be dense and unique in [0, {}); got {}",
                                        nodes_path.string(), n, r.id));
    }
    seen[r.id] = true;
    std::copy(r.x.begin(), r.x.end(), features.row(r.id).begin());
    labels[r.id] = r.label;
    domains[r.id] = r.domain;
    max_label = std::max(max_label, r.label);
  }
  if (num_classes <= 0) num_classes = max_label + 1;

  std::ifstream edges_in(edges_path);
  if (!edges_in) throw ParseError(fmt::format("cannot open {}", edges_path.string()), 0);
  line_no = 0;
  if (!std::getline(edges_in, line)) {
    throw ParseError(fmt::format("{}: missing header", edges_path.string()), 1);
  }
  ++line_no;
  const auto edge_header = split_fields(line);
  if (edge_header.size() != 2 || edge_header[0] != "src" || edge_header[1] != "dst") {
    throw ParseError(fmt::format("{}:1: expected header src,dst", edges_path.string()), 1);
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  while (std::getline(edges_in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) {
      throw ParseError(fmt::format("{}:{}: expected 2 fields, found {}", edges_path.string(),
                                   line_no, fields.size()),
                       line_no);
    }
    const auto u = parse_number<std::size_t>(fields[0], edges_path, line_no);
    const auto v = parse_number<std::size_t>(fields[1], edges_path, line_no);
    if (u >= n || v >= n) {
      throw ValidationError(fmt::format("{}:{}: edge ({}, {}) references unknown node id",
                                        edges_path.string(), line_no, u, v));
    }
    edges.emplace_back(u, v);
  }
  return build_graph(n, edges, std::move(features), std::move(labels), num_classes,
                     std::move(domains));
}

void save_domain(const Graph& g, const std::filesystem::path& nodes_path,
                 const std::filesystem::path& edges_path) {
  std::ofstream nodes_out(nodes_path);
  std::ofstream edges_out(edges_path);
  if (!nodes_out || !edges_out) {
    throw ValidationError(fmt::format("cannot write {} / {}", nodes_path.string(),
                                      edges_path.string()));
  }
  std::string buf = "id";
  for (std::size_t j = 0; j < g.feat_dim(); ++j) buf += fmt::format(",f{}", j);
  buf += ",label,domain\n";
  nodes_out << buf;
  for (std::size_t v = 0; v < g.node_count; ++v) {
    buf = fmt::format("{}", v);
    for (double x : g.features.row(v)) buf += fmt::format(",{}", x);
    buf += fmt::format(",{},{}\n", g.labels[v], g.node_domain[v]);
    nodes_out << buf;
  }
  edges_out << "src,dst\n";
  for (std::size_t u = 0; u < g.node_count; ++u) {
    for (std::size_t v : g.neighbors(u)) {
      if (v >= u) edges_out << u << ',' << v << '\n';
    }
  }
}

Graph split_nodes(Graph graph, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must be nonnegative and sum to 1");
  }
  const std::size_t n = graph.node_count;
  if (n < 3) {
    throw ValidationError(fmt::format("cannot split {} nodes into train/val/test", n));
  }
  // The small slack keeps products like 0.2 * 10 from landing just below an integer.
  const auto floor_count = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = floor_count(ratios.val);
  const std::size_t n_test = floor_count(ratios.test);
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));
  for (std::size_t i = 0; i < n; ++i) {
    graph.split[order[i]] = i < n_train ? Split::Train
                            : i < n_train + n_val ? Split::Val
                                                  : Split::Test;
  }
  return graph;
}

Graph induced_subgraph(const Graph& g, std::span<const std::size_t> nodes) {
  constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  std::vector<std::size_t> local(g.node_count, kAbsent);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] >= g.node_count || local[nodes[i]] != kAbsent) {
      throw ValidationError("induced_subgraph: node list has invalid or repeated ids");
    }
    local[nodes[i]] = i;
  }
  Graph sub;
  sub.node_count = nodes.size();
  sub.features = Matrix(nodes.size(), g.feat_dim());
  sub.num_classes = g.num_classes;
  sub.row_offsets.assign(1, 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::size_t v = nodes[i];
    std::vector<std::size_t> nb;
    for (std::size_t u : g.neighbors(v)) {
      if (local[u] != kAbsent) nb.push_back(local[u]);
    }
    std::sort(nb.begin(), nb.end());
    sub.col_indices.insert(sub.col_indices.end(), nb.begin(), nb.end());
    sub.row_offsets.push_back(sub.col_indices.size());
    std::copy(g.features.row(v).begin(), g.features.row(v).end(), sub.features.row(i).begin());
    sub.labels.push_back(g.labels[v]);
    sub.split.push_back(g.split[v]);
    sub.node_domain.push_back(g.node_domain[v]);
    sub.source_ids.push_back(g.source_ids[v]);
  }
  if (!sub.node_domain.empty() &&
      std::all_of(sub.node_domain.begin(), sub.node_domain.end(),
                  [&](int d) { return d == sub.node_domain.front(); })) {
    sub.domain_id = sub.node_domain.front();
  } else {
    sub.domain_id = nodes.empty() ? g.domain_id : -1;
  }
  return sub;
}

std::vector<Graph> partition_domain(const Graph& g, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > g.node_count) {
    throw ValidationError(
        fmt::format("cannot partition {} nodes into {} clients", g.node_count, k));
  }
  std::vector<std::size_t> order(g.node_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));

  std::vector<Graph> clients;
  clients.reserve(k);
  const std::size_t base = g.node_count / k;
  const std::size_t extra = g.node_count % k;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t size = base + (c < extra ? 1 : 0);
    std::vector<std::size_t> group(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                   order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
    std::sort(group.begin(), group.end());
    Graph sub = induced_subgraph(g, group);
    if (sub.node_count >= 3) {
      sub = split_nodes(std::move(sub), SplitRatios{}, derive_seed(seed, c));
    } else {
      sub.split.assign(sub.node_count, Split::Train);
    }
    clients.push_back(std::move(sub));
  }
  return clients;
}

std::vector<Graph> split_by_domain(const Graph& g) {
  const std::set<int> tags(g.node_domain.begin(), g.node_domain.end());
  std::vector<Graph> out;
  for (int tag : tags) {
    std::vector<std::size_t> nodes;
    for (std::size_t v = 0; v < g.node_count; ++v) {
      if (g.node_domain[v] == tag) nodes.push_back(v);
    }
    out.push_back(induced_subgraph(g, nodes));
  }
  return out;
}

std::size_t PartitionPlan::total_clients() const {
  std::size_t total = 0;
  for (int r : domain_ratios) total += static_cast<std::size_t>(r) * clients_per_unit;
  return total;
}

PartitionPlan parse_plan(const std::string& text, std::uint64_t seed) {
  PartitionPlan plan;
  plan.seed = seed;
  std::string_view ratios = text;
  if (const auto at = ratios.find('@'); at != std::string_view::npos) {
    const auto tail = ratios.substr(at + 1);
    std::size_t cpu = 0;
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), cpu);
    if (ec != std::errc{} || ptr != tail.data() + tail.size() || cpu == 0) {
      throw ParseError(fmt::format("plan '{}': clients per unit must be a positive integer", text),
                       0);
    }
    plan.clients_per_unit = cpu;
    ratios = ratios.substr(0, at);
  }
  std::size_t start = 0;
  while (start <= ratios.size()) {
    const auto colon = ratios.find(':', start);
    const auto field = ratios.substr(start, colon == std::string_view::npos ? std::string_view::npos
                                                                            : colon - start);
    int r = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), r);
    if (ec != std::errc{} || ptr != field.data() + field.size() || r <= 0) {
      throw ParseError(fmt::format("plan '{}': ratios must be positive integers", text), 0);
    }
    plan.domain_ratios.push_back(r);
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  return plan;
}

std::vector<Graph> partition_by_plan(const Graph& g, const PartitionPlan& plan) {
  const auto domains = split_by_domain(g);
  if (domains.size() != plan.domain_ratios.size()) {
    throw ValidationError(fmt::format("plan has {} ratios but the graph has {} domains",
                                      plan.domain_ratios.size(), domains.size()));
  }
  std::vector<Graph> clients;
  for (std::size_t d = 0; d < domains.size(); ++d) {
    const std::size_t k = static_cast<std::size_t>(plan.domain_ratios[d]) * plan.clients_per_unit;
    auto parts = partition_domain(domains[d], k, derive_seed(plan.seed, d));
    for (auto& p : parts) clients.push_back(std::move(p));
  }
  return clients;
}

std::vector<Graph> generate_synthetic_domains(std::size_t num_domains,
                                              std::size_t nodes_per_domain,
                                              std::size_t feat_dim, int num_classes,
                                              double skew_strength, std::uint64_t seed,
                                              const SyntheticOptions& options) {
  if (num_domains == 0 || nodes_per_domain == 0 || feat_dim == 0 || num_classes < 1) {
    throw ValidationError("synthetic generator counts must all be >= 1");
  }
  if (!(skew_strength >= 0.0)) throw ValidationError("skew_strength must be >= 0");

  const auto random_direction = [feat_dim](Rng& rng, double norm) {
    std::vector<double> v(feat_dim);
    double sq = 0.0;
    while (sq == 0.0) {
      for (auto& x : v) x = rng.normal();
      sq = 0.0;
      for (double x : v) sq += x * x;
    }
    const double scale = norm / std::sqrt(sq);
    for (auto& x : v) x *= scale;
    return v;
  };

  // Class means are shared by every domain.
  Rng mean_rng(derive_seed(seed, 0));
  std::vector<std::vector<double>> class_means;
  for (int c = 0; c < num_classes; ++c) {
    class_means.push_back(random_direction(mean_rng, options.class_separation));
  }

  const double n = static_cast<double>(nodes_per_domain);
  const double block = n / num_classes;
  const double p_in = block > 1.0 ? std::min(1.0, options.intra_degree / (block - 1.0)) : 0.0;
  const double p_out = n - block > 0.0 ? std::min(1.0, options.inter_degree / (n - block)) : 0.0;

  std::vector<Graph> domains;
  for (std::size_t d = 0; d < num_domains; ++d) {
    Rng rng(derive_seed(seed, 1 + d));
    std::vector<double> offset(feat_dim, 0.0);
    if (skew_strength > 0.0) offset = random_direction(rng, skew_strength);

    std::vector<int> labels(nodes_per_domain);
    for (auto& y : labels) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes)));

    Matrix features(nodes_per_domain, feat_dim);
    for (std::size_t v = 0; v < nodes_per_domain; ++v) {
      auto row = features.row(v);
      const auto& mu = class_means[static_cast<std::size_t>(labels[v])];
      for (std::size_t j = 0; j < feat_dim; ++j) row[j] = mu[j] + offset[j] + rng.normal();
    }

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t u = 0; u < nodes_per_domain; ++u) {
      for (std::size_t v = u + 1; v < nodes_per_domain; ++v) {
        const double p = labels[u] == labels[v] ? p_in : p_out;
        if (rng.uniform() < p) edges.emplace_back(u, v);
      }
    }
    domains.push_back(build_graph(nodes_per_domain, edges, std::move(features),
                                  std::move(labels), num_classes,
                                  std::vector<int>(nodes_per_domain, static_cast<int>(d))));
  }
  return domains;
}

}  // namespace fedia
